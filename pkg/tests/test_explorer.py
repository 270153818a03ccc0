import random

import pytest

from klaimnet.dsl import parse_net
from klaimnet.explorer import Bounds, NoWitness, check, explore, holds, shortest_trace
from klaimnet.engine import enabled
from klaimnet.simulator import replay

from conftest import load

OUT_IN = "node s_a env { l_b -> s_b } procs { out(1)@l_b }\nnode s_b procs { in(!x)@self }"


def parsed(text):
    return parse_net(text)


class TestCounts:
    def test_empty_net(self):
        res = explore(parsed("").state)
        assert (res.states_visited, res.transitions_fired) == (1, 0)
        assert [kind for _, kind in res.terminals] == ["Terminated"]
        assert not res.truncated

    def test_out_in(self):
        res = explore(parsed(OUT_IN).state)
        assert (res.states_visited, res.transitions_fired) == (3, 2)
        assert [kind for _, kind in res.terminals] == ["Terminated"]

    def test_deadlock_classification(self):
        res = explore(parsed("node s_a procs { in(!x)@self }").state)
        assert [kind for _, kind in res.terminals] == ["Deadlocked"]

    def test_login_micro_net(self):
        res = explore(parsed("node s_a env { l_b -> s_b } coord { login(l_b) }\nnode s_b coord { accept{s_a} }").state)
        assert (res.states_visited, res.transitions_fired) == (2, 1)

    def test_eval_micro_net(self):
        res = explore(parsed("node s_a env { l_b -> s_b } procs { eval(out(1)@self)@l_b }\nnode s_b").state)
        assert (res.states_visited, res.transitions_fired) == (3, 2)


class TestVerdicts:
    def test_shortest_witness(self):
        result = parsed(OUT_IN + "\nassert reachable terminated")
        res = explore(result.state, assertions=result.assertions)
        assert len(shortest_trace(res, result.assertions[0]).steps) == 2

    def test_true_initially(self):
        result = parsed("node s_a ts { (1) }\nassert reachable ts(s_a) contains (1)")
        assert check(result.state, result.assertions[0]).witness.steps == []

    def test_invariant_pass_has_no_witness(self):
        result = parsed("node s_a\nassert invariant links_symmetric")
        res = explore(result.state, assertions=result.assertions)
        assert res.verdicts[0].passed
        with pytest.raises(NoWitness):
            shortest_trace(res, result.assertions[0])

    def test_broken_scenario_deadlocks(self):
        # wrong template arity: the in can never match
        text = "node s_a procs { out(1, 2)@self.in(!x)@self }\nassert invariant no_deadlock"
        result = parsed(text)
        verdict = check(result.state, result.assertions[0])
        assert not verdict.passed
        assert [s.action for s in verdict.witness.steps] == ["out(1, 2)@s_a"]

    def test_join_witness_ends_with_login(self):
        result = load("join")
        res = explore(result.state, assertions=result.assertions)
        witness = res.verdicts[0].witness
        assert witness.steps[-1].kind == "login"
        final = replay(result.state, witness)
        assert holds(result.assertions[0].predicate, final, enabled(final))

    def test_blocked_forever(self):
        result = parsed(
            "node s_a env { l_b -> s_b } procs { in(2)@self.out(1)@l_b } ts { (1) }\nnode s_b\n"
            "assert blocked_forever action(out, s_a)\n"
            "assert blocked_forever action(in, s_a)\n"
        )
        res = explore(result.state, assertions=result.assertions)
        assert [v.passed for v in res.verdicts] == [True, True]
        result = parsed("node s_a procs { in(1)@self.out(1)@self } ts { (1) }\nassert blocked_forever action(out, s_a, s_a)")
        assert not check(result.state, result.assertions[0]).passed

    def test_unwitnessed_reachable_fails_when_truncated(self):
        result = load("publish")
        reach = parsed(
            "node s_pm\nassert reachable ts(s_pm) count (\"measure pulse\", 1, !r) == 2"
        ).assertions[0]
        res = explore(result.state, bounds=Bounds(max_states=50), assertions=[reach])
        assert res.truncated and not res.verdicts[0].passed


class TestBounds:
    def test_max_states(self):
        res = explore(load("publish").state, bounds=Bounds(max_states=100))
        assert res.truncated and res.states_visited == 100

    def test_max_depth(self):
        res = explore(parsed(OUT_IN).state, bounds=Bounds(max_depth=1))
        assert res.truncated and res.states_visited == 2

    def test_doubling_bound_changes_nothing_once_complete(self):
        state = load("publish").state
        small = explore(state, bounds=Bounds(max_states=5_000))
        large = explore(state, bounds=Bounds(max_states=10_000))
        assert not small.truncated
        assert (small.states_visited, small.transitions_fired) == (large.states_visited, large.transitions_fired)


class TestSoundness:
    def test_sampled_states_replay(self):
        result = load("publish")
        res = explore(result.state)
        rng = random.Random(0)
        for digest in rng.sample(sorted(res.parents), 100):
            trace = res.trace_to(digest)
            assert replay(result.state, trace).digest == digest

    def test_workers_agree(self):
        result = load("publish")
        one = explore(result.state, assertions=result.assertions, workers=1)
        two = explore(result.state, assertions=result.assertions, workers=2)
        assert one.states_visited == two.states_visited
        assert one.terminals == two.terminals
        assert list(one.parents) == list(two.parents)
