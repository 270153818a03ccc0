import json

import pytest

from klaimnet.core import NIL, SELF, Choice, Formal, In, Name, Out, Par, Prefix, SiteRef, Symbol
from klaimnet.dsl import (
    Link,
    ParseErrors,
    SiteSel,
    StatePred,
    TupleAt,
    parse_net,
    parse_process,
    parse_trace_json,
    render_net,
    render_state,
    render_trace_json,
)
from klaimnet.engine import Step, Trace

from conftest import load

ALL = ["driver_assist", "join", "leave", "stranger", "publish", "discover", "request", "link_failure"]


def errors(text, **kw):
    with pytest.raises(ParseErrors) as info:
        parse_net(text, **kw)
    return [d.message for d in info.value.diagnostics]


class TestParse:
    def test_empty_text(self):
        result = parse_net("")
        assert result.state.nodes == {} and result.assertions == []

    def test_driver_assist(self):
        state = load("driver_assist").state
        assert sorted(state.nodes) == ["s_ampl", "s_cu", "s_ecg", "s_pm"]
        assert state.nodes["s_cu"].links == {"s_ampl", "s_pm"}

    def test_values_and_templates(self):
        result = parse_net('node s_a procs { in("x", 1, s_b, `sym`, !v, l_q)@self }')
        (proc,) = result.state.nodes["s_a"].procs
        assert proc == Prefix(In(("x", 1, SiteRef("s_b"), Symbol("sym"), Formal("v"), Name("l_q")), Name(SELF)), NIL)

    def test_precedence(self):
        # prefix binds tighter than +, + tighter than |
        p = parse_process("out(1)@self + out(2)@self | out(3)@self")
        one, two, three = (Prefix(Out((i,), Name(SELF)), NIL) for i in (1, 2, 3))
        assert p == Par((Choice((one, two)), three))
        assert parse_process("out(1)@self.(out(2)@self | nil)") == Prefix(Out((1,), Name(SELF)), Par((two, NIL)))

    def test_trailing_action_implies_nil(self):
        assert parse_process("out(1)@self") == parse_process("out(1)@self.nil")

    def test_assertions(self):
        result = load("join")
        assert result.assertions[0].mode == "reachable"
        assert result.assertions[0].predicate == Link(SiteSel("s_cu"), SiteSel("s_pm"))
        assert result.assertions[2].predicate == StatePred("links_symmetric")

    def test_site_selector_through_env(self):
        result = load("discover")
        pred = result.assertions[0].predicate
        assert isinstance(pred, TupleAt) and pred.site == SiteSel("s_cu", "l_1")

    def test_fresh_counter_covers_generated_names(self):
        assert parse_net("node s#4").state.fresh == 5
        assert parse_net("fresh 9\nnode s_a").state.fresh == 9

    def test_deterministic(self):
        text = (load("publish").state.text)
        assert parse_net(text).state.canonical == parse_net(text).state.canonical

    def test_unknown_extension(self):
        with pytest.raises(ValueError):
            parse_net("", extensions=["teleport"])


class TestStaticErrors:
    def test_privileged_action_in_plain_definition(self):
        msgs = errors("def Foo() = login(l_x).nil")
        assert len(msgs) == 1
        assert "privileged action 'login'" in msgs[0] and "'Foo'" in msgs[0]

    def test_privileged_action_in_procs_block(self):
        assert any("privileged action 'newloc'" in m for m in errors("node s_a procs { newloc(l_1 as s_b) }"))

    def test_privileged_action_inside_eval(self):
        assert errors("coord def C() = eval(logout(l_x))@self")

    def test_plain_code_cannot_call_coordinator(self):
        msgs = errors("coord def C() = login(l_x)\nnode s_a procs { C() }")
        assert any("C" in m for m in msgs)

    def test_undefined_and_arity(self):
        msgs = errors("def P(x) = out(x)@self\nnode s_a procs { P() | Q(1) }")
        assert any("expects 1 argument" in m for m in msgs)
        assert any("undefined definition 'Q'" in m for m in msgs)

    def test_unguarded_recursion(self):
        assert any("recursion" in m for m in errors("def P() = P()"))
        assert any("recursion" in m for m in errors("def P() = Q()\ndef Q() = (P() | out(1)@self)"))
        parse_net("def P() = out(1)@self.P()")

    def test_links(self):
        assert errors("node s_a links { s_b }")  # undeclared node
        assert errors("node s_a links { s_b }\nnode s_b")  # asymmetric
        assert errors("node s_a links { s_a }")

    def test_env(self):
        assert errors("node s_a env { self -> s_a }")
        assert errors("node s_a env { l_x -> s_a, l_x -> s_b }")

    def test_distinct_formals(self):
        assert errors("node s_a procs { in(!x, !x)@self }")

    def test_assertion_sites_must_exist(self):
        assert errors("assert reachable link(s_a, s_b)")
        parse_net("node s_a\nexternal s_b\nassert reachable link(s_a, s_b)")

    def test_several_errors_in_one_pass(self):
        msgs = errors("def A() = login(l)\nnode s_a procs { out(1)@ }\ndef B() = logout(l)")
        assert len(msgs) == 3

    def test_spans_point_into_the_text(self):
        text = "node s_a\n  procs { out(1)@self.login(l) }\n"
        with pytest.raises(ParseErrors) as info:
            parse_net(text, filename="f.klaim")
        (d,) = info.value.diagnostics
        assert (d.span.file, d.span.line) == ("f.klaim", 2)
        line = text.splitlines()[d.span.line - 1]
        assert line[d.span.column - 1 :].startswith("login")


class TestWarnings:
    def test_wildcard_needs_extension(self):
        text = "node s_a coord { accept{s_b, *} }\nnode s_b"
        off = parse_net(text)
        on = parse_net(text, extensions=["open-accept"])
        assert any("open-accept" in w.message for w in off.warnings)
        assert not off.state.nodes["s_a"].coords[0].action.wildcard
        assert on.state.nodes["s_a"].coords[0].action.wildcard

    def test_anonymous_newloc_lint(self):
        assert any("newloc" in w.message for w in parse_net("node s_a coord { newloc(l_1) }").warnings)


class TestRender:
    @pytest.mark.parametrize("name", ALL)
    def test_round_trip(self, name):
        state = load(name).state
        assert parse_net(render_state(state)).state == state

    def test_render_net_keeps_assertions(self):
        result = load("leave")
        text = render_net(result.state, result.assertions, result.externals)
        again = parse_net(text)
        assert again.state == result.state
        assert [str(a) for a in again.assertions] == [str(a) for a in result.assertions]

    def test_empty_net(self):
        assert parse_net(render_state(parse_net("").state)).state.nodes == {}


class TestTraceJson:
    def test_format(self):
        state = parse_net("node s_a").state
        trace = Trace(7, [Step("s_a", "out(1)@s_a"), Step("s_a", "login(s_b)", "s_b")])
        doc = json.loads(render_trace_json(trace, state))
        assert list(doc) == ["seed", "steps", "final_state"]
        assert doc["steps"] == [
            {"site": "s_a", "action": "out(1)@s_a"},
            {"site": "s_a", "action": "login(s_b)", "partner": "s_b"},
        ]
        assert doc["final_state"] == render_state(state)

    def test_parse_back(self):
        trace = Trace(1, [Step("s_a", "exec f(1)"), Step("s_b", "login(s_a)", "s_a")])
        text = render_trace_json(trace, parse_net("").state)
        assert parse_trace_json(text) == trace
        assert render_trace_json(parse_trace_json(text), parse_net("").state) == text
