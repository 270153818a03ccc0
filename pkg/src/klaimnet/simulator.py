"""Seeded random runs and trace replay.

The scheduler draws uniformly among all enabled transitions (not among
nodes). Randomness comes from CPython's ``random.Random`` (Mersenne Twister
MT19937) seeded with the integer seed; each step takes
``enabled[rng.randrange(len(enabled))]`` from the label-sorted list. Do not
change this without bumping the trace format: recorded traces depend on it.
"""

from __future__ import annotations

import random

from .core import NetState, StaleTransition
from .engine import DEFAULT, EngineConfig, Step, Trace, enabled


def run(s0: NetState, seed: int, max_steps: int, cfg: EngineConfig = DEFAULT) -> tuple:
    """Return ``(trace, final_state)``."""
    rng = random.Random(seed)
    state = s0
    steps = []
    for _ in range(max_steps):
        ts = enabled(state, cfg)
        if not ts:
            break
        t = ts[rng.randrange(len(ts))]
        steps.append(t.label)
        state = t.successor
    return Trace(seed, steps), state


def replay(s0: NetState, trace: Trace, cfg: EngineConfig = DEFAULT) -> NetState:
    state = s0
    for index, label in enumerate(trace.steps):
        label = Step(*label)
        for t in enabled(state, cfg):
            if t.label == label:
                state = t.successor
                break
        else:
            raise StaleTransition(f"{label.site}: {label.action} is not enabled", index)
    return state


def is_stalled(state: NetState, cfg: EngineConfig = DEFAULT) -> bool:
    """No transition enabled although some process is still running."""
    return not state.terminated and not enabled(state, cfg)
