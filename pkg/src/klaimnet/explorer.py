"""Breadth-first exploration of the interleaving state space.

States are deduplicated by a digest of their canonical form. Every state
is expanded exactly once; assertions are decided on the fly, so the first
witness found for an assertion is a shortest one.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .core import SELF, KlaimError, NetState, links_symmetric, match_template
from .dsl import (
    ActionEnabled,
    And,
    Assertion,
    Implies,
    Link,
    Not,
    Or,
    SiteSel,
    StatePred,
    TruePred,
    TupleAt,
    TupleCount,
)
from .engine import DEFAULT, EngineConfig, Trace, enabled

# Frontiers smaller than this are expanded in-process even with workers > 1.
PARALLEL_THRESHOLD = 64


class NoWitness(KlaimError):
    pass


@dataclass(frozen=True)
class Bounds:
    max_states: int = 200_000
    max_depth: Optional[int] = None


@dataclass
class Verdict:
    assertion: Assertion
    passed: bool
    witness: Optional[Trace] = None

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"


@dataclass
class ExploreResult:
    states_visited: int
    transitions_fired: int
    terminals: list
    truncated: bool
    verdicts: list
    initial: NetState
    parents: dict = field(repr=False, default_factory=dict)

    def trace_to(self, digest: bytes) -> Trace:
        steps = []
        while True:
            parent, label = self.parents[digest]
            if parent is None:
                break
            steps.append(label)
            digest = parent
        steps.reverse()
        return Trace(None, steps)

    def verdict_for(self, assertion: Assertion) -> Verdict:
        for v in self.verdicts:
            if v.assertion == assertion:
                return v
        raise KeyError(assertion)


# --------------------------------------------------------------------------
# predicates


def select(sel: SiteSel, state: NetState) -> Optional[str]:
    if sel.loc is None:
        return sel.site
    node = state.nodes.get(sel.site)
    if node is None:
        return None
    if sel.loc == SELF:
        return node.site
    return node.env.get(sel.loc)


def _matches(template, state, sel):
    site = select(sel, state)
    node = state.nodes.get(site) if site is not None else None
    if node is None:
        return 0
    return sum(1 for t in node.ts if match_template(template, t) is not None)


_COMPARE = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def holds(pred, state: NetState, transitions: list) -> bool:
    """Evaluate a predicate on a state whose enabled transitions are given."""
    if isinstance(pred, TruePred):
        return pred.value
    if isinstance(pred, TupleAt):
        return _matches(pred.template, state, pred.site) > 0
    if isinstance(pred, TupleCount):
        return _COMPARE[pred.op](_matches(pred.template, state, pred.site), pred.count)
    if isinstance(pred, Link):
        a, b = select(pred.a, state), select(pred.b, state)
        node = state.nodes.get(a) if a is not None else None
        return node is not None and b in node.links
    if isinstance(pred, StatePred):
        if pred.name == "terminal":
            return not transitions
        if pred.name == "terminated":
            return state.terminated
        if pred.name == "no_deadlock":
            return bool(transitions) or state.terminated
        if pred.name == "links_symmetric":
            return links_symmetric(state)
        raise ValueError(pred.name)
    if isinstance(pred, ActionEnabled):
        site = select(pred.site, state)
        target = select(pred.target, state) if pred.target is not None else None
        return any(
            t.kind == pred.kind and t.site == site and (pred.target is None or t.target == target)
            for t in transitions
        )
    if isinstance(pred, Not):
        return not holds(pred.arg, state, transitions)
    if isinstance(pred, And):
        return all(holds(q, state, transitions) for q in pred.items)
    if isinstance(pred, Or):
        return any(holds(q, state, transitions) for q in pred.items)
    if isinstance(pred, Implies):
        return not holds(pred.premise, state, transitions) or holds(pred.conclusion, state, transitions)
    raise TypeError(pred)


def _looking_for(assertion: Assertion, value: bool) -> bool:
    """Whether a state with predicate ``value`` settles the assertion."""
    return value if assertion.mode in ("reachable", "blocked_forever") else not value


# --------------------------------------------------------------------------
# exploration


def _expand_batch(batch: list, cfg: EngineConfig) -> list:
    return [enabled(s, cfg) for s in batch]


def resolve_workers(workers) -> int:
    if workers in (None, "auto", 0):
        return max(1, min(8, os.cpu_count() or 1))
    return max(1, int(workers))


def explore(
    s0: NetState,
    cfg: EngineConfig = DEFAULT,
    bounds: Bounds = Bounds(),
    assertions=(),
    workers=1,
) -> ExploreResult:
    """Explore every state reachable from ``s0`` within ``bounds``.

    Results never depend on ``workers``: frontiers are expanded in parallel
    but merged back in frontier order.
    """
    assertions = list(assertions)
    workers = resolve_workers(workers)
    witnesses: dict = {}
    parents = {s0.digest: (None, None)}
    terminals = []
    transitions_fired = 0
    truncated = False
    frontier = [s0]
    depth = 0
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        while frontier:
            if pool is not None and len(frontier) >= PARALLEL_THRESHOLD:
                size = -(-len(frontier) // (workers * 4))
                chunks = [frontier[i : i + size] for i in range(0, len(frontier), size)]
                expansions = [e for part in pool.map(_expand_batch, chunks, [cfg] * len(chunks)) for e in part]
            else:
                expansions = _expand_batch(frontier, cfg)
            nxt = []
            for state, trans in zip(frontier, expansions):
                for i, a in enumerate(assertions):
                    if i not in witnesses and _looking_for(a, holds(a.predicate, state, trans)):
                        witnesses[i] = state.digest
                if not trans:
                    terminals.append((state.text, "Terminated" if state.terminated else "Deadlocked"))
                    continue
                if bounds.max_depth is not None and depth >= bounds.max_depth:
                    truncated = True
                    continue
                for t in trans:
                    transitions_fired += 1
                    key = t.successor.digest
                    if key in parents:
                        continue
                    if len(parents) >= bounds.max_states:
                        truncated = True
                        continue
                    parents[key] = (state.digest, t.label)
                    nxt.append(t.successor)
            frontier = nxt
            depth += 1
    finally:
        if pool is not None:
            pool.shutdown()
    result = ExploreResult(len(parents), transitions_fired, terminals, truncated, [], s0, parents)
    for i, a in enumerate(assertions):
        if i in witnesses:
            trace = result.trace_to(witnesses[i])
            result.verdicts.append(Verdict(a, a.mode == "reachable", trace))
        else:
            result.verdicts.append(Verdict(a, a.mode != "reachable"))
    return result


def check(s0: NetState, assertion: Assertion, cfg: EngineConfig = DEFAULT, bounds: Bounds = Bounds()) -> Verdict:
    return explore(s0, cfg, bounds, [assertion]).verdicts[0]


def shortest_trace(result: ExploreResult, assertion: Assertion) -> Trace:
    verdict = result.verdict_for(assertion)
    if verdict.witness is None:
        raise NoWitness(f"no witness for {assertion}")
    return verdict.witness
