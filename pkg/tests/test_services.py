import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from klaimnet.core import NIL, Call, Name, NetState, Node, SiteRef, UnknownSite, Symbol
from klaimnet.dsl import parse_net, render_net
from klaimnet.explorer import explore
from klaimnet.simulator import run
from klaimnet.services import (
    PublishMode,
    ServiceRecord,
    build_discover,
    build_publish,
    build_request,
    discover_caller,
    install_publish,
    list_services,
    request_names,
)

from conftest import load, net

DESC = "measure pulse"


def terminal_states(state):
    res = explore(state)
    assert not res.truncated
    return res, [(parse_net(text).state, kind) for text, kind in res.terminals]


def records(state, site):
    return [r for r in list_services(state, site) if (r.description, r.id) == (DESC, 1)]


def line(*sites):
    """Nodes linked in a line, each neighbour reachable through l_<name>."""
    text = []
    for i, s in enumerate(sites):
        nbrs = [sites[j] for j in (i - 1, i + 1) if 0 <= j < len(sites)]
        env = ", ".join(f"l_{n[2:]} -> {n}" for n in nbrs)
        text.append(f"node {s} links {{ {', '.join(nbrs)} }} env {{ {env} }}")
    return net("\n".join(text))


class TestPublish:
    def test_isolated_provider(self):
        state = install_publish(net("node s_pm"), "s_pm", DESC, 1)
        res, finals = terminal_states(state)
        assert res.transitions_fired == 1
        ((final, kind),) = finals
        assert kind == "Terminated"
        assert list_services(final, "s_pm") == [ServiceRecord(DESC, 1, "s_pm")]

    @pytest.mark.parametrize("mode, expected", [(PublishMode.HOP_ROUTED, "s_ecg"), (PublishMode.DIRECT, "s_pm")])
    def test_line_routes(self, mode, expected):
        state = install_publish(line("s_pm", "s_ecg", "s_ampl"), "s_pm", DESC, 1, mode)
        _, finals = terminal_states(state)
        assert finals
        for final, kind in finals:
            assert kind == "Terminated"
            assert [r.loc for r in records(final, "s_ampl")] == [expected]
            assert [r.loc for r in records(final, "s_ecg")] == ["s_pm"]

    def test_direct_mode_on_the_car_net(self):
        state = install_publish(load("driver_assist").state, "s_pm", DESC, 1, PublishMode.DIRECT)
        _, finals = terminal_states(state)
        for final, kind in finals:
            assert kind == "Terminated"
            assert all(len(records(final, s)) == 1 for s in final.nodes)

    def test_bundled_file_matches_generator(self):
        # publish.klaim is the generator's output on the bare car net
        bare = load("driver_assist").state
        nodes = [Node(s, n.links, n.env) for s, n in bare.nodes.items()]
        generated = install_publish(NetState({n.site: n for n in nodes}), "s_pm", DESC, 1)
        assert generated == load("publish").state

    def test_generated_definitions_pass_static_checks(self):
        state = install_publish(load("driver_assist").state, "s_pm", DESC, 1)
        assert parse_net(render_net(state)).state == state
        assert set(build_publish(DESC, 1, degrees=[0, 3])) == {
            "PubProvider_1_0",
            "PubReceive_1_0",
            "PubProvider_1_3",
            "PubReceive_1_3",
        }


@st.composite
def connected_graphs(draw):
    n = draw(st.integers(2, 4))
    sites = [f"s_n{i}" for i in range(n)]
    edges = {(draw(st.integers(0, i - 1)), i) for i in range(1, n)}  # spanning tree
    # at most one extra edge: full interleaving of a flood over denser graphs is too large
    extra = draw(st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=1))
    edges |= {(min(a, b), max(a, b)) for a, b in extra if a != b}
    links = {s: set() for s in sites}
    for a, b in edges:
        links[sites[a]].add(sites[b])
        links[sites[b]].add(sites[a])
    nodes = {s: Node(s, links[s], {f"l_{o[2:]}": o for o in links[s]}) for s in sites}
    return NetState(nodes), draw(st.sampled_from(sites))


@settings(max_examples=25, deadline=None)
@given(connected_graphs())
def test_hop_routes_lead_to_the_provider(graph):
    state, provider = graph
    _, finals = terminal_states(install_publish(state, provider, DESC, 1))
    for final, kind in finals:
        assert kind == "Terminated"
        check_route_tree(final, provider)


def check_route_tree(final, provider):
    for site in final.nodes:
        seen = [site]
        while seen[-1] != provider:
            (rec,) = records(final, seen[-1])
            assert rec.loc in final.nodes[seen[-1]].links
            assert rec.loc not in seen
            seen.append(rec.loc)
    assert [r.loc for r in records(final, provider)] == [provider]


@pytest.mark.parametrize("n", [4, 5])
def test_flood_on_complete_graphs_by_simulation(n):
    sites = [f"s_n{i}" for i in range(n)]
    nodes = {s: Node(s, set(sites) - {s}, {f"l_{o[2:]}": o for o in sites if o != s}) for s in sites}
    state = install_publish(NetState(nodes), "s_n0", DESC, 1)
    for seed in range(30):
        _, final = run(state, seed, 10_000)
        assert final.terminated
        check_route_tree(final, "s_n0")


def caller_net(registry, caller_site, **nodes_text):
    """Parse a net, add registry tuples and a discover caller at ``caller_site``."""
    state = net(nodes_text["text"])
    changed = []
    for site, route in registry.items():
        n = state.nodes[site]
        changed.append(Node(site, n.links, n.env, n.procs, n.coords, n.ts + ((DESC, 1, SiteRef(route)),)))
    state = state.with_nodes(*changed)
    state = NetState(state.nodes, state.defs.merged([build_discover(DESC, 1)]), state.fresh)
    n = state.nodes[caller_site]
    caller = discover_caller(1, NIL, reply_site="s_reply")
    return state.with_nodes(Node(n.site, n.links, n.env, n.procs, (caller,), n.ts))


class TestDiscover:
    def test_at_the_provider(self):
        state = caller_net({"s_pm": "s_pm"}, "s_pm", text="node s_pm")
        _, finals = terminal_states(state)
        assert all(kind == "Terminated" for _, kind in finals)
        probe = parse_net("node s_pm\nexternal s_reply\nassert reachable ts(s_pm.l_1) contains (s_pm)")
        verdict = explore(state, assertions=probe.assertions).verdicts[0]
        assert verdict.passed
        assert [s.kind for s in verdict.witness.steps] == ["newloc", "eval", "read", "out"]
        assert verdict.witness.steps[1].action.endswith("@s_pm")  # launched locally, no hop

    def test_no_record_blocks(self):
        state = caller_net({}, "s_cu", text="node s_cu")
        _, finals = terminal_states(state)
        assert [kind for _, kind in finals] == ["Deadlocked"]

    def test_every_reply_names_a_provider(self):
        result = load("discover")
        res = explore(result.state, assertions=result.assertions)
        assert all(v.passed for v in res.verdicts)
        replies = {label for _, label in res.parents.values() if label is not None and label.action.startswith("out(") and label.action.endswith("@s_reply")}
        assert replies == {("s_pm", "out(s_pm)@s_reply", None)}


class TestRequest:
    def test_definitions(self):
        defs = build_request("measurePulse")
        client, serve = request_names("measurePulse")
        assert defs[client].coord and not defs[serve].coord
        assert defs[client].params == ("provider",)

    def test_provider_rearms(self):
        defs = build_request("measurePulse").values()
        client, serve = request_names("measurePulse")
        text = (
            "node s_cu links { s_pm } env { l_pm -> s_pm }\n"
            "node s_pm links { s_cu } env { l_cu -> s_cu }\n"
        )
        state = net(text)
        cu, pm = state.nodes["s_cu"], state.nodes["s_pm"]
        two = (Call(client, (Name("l_pm"),)), Call(client, (Name("l_pm"),)))
        state = NetState(state.nodes, state.defs.merged(defs)).with_nodes(
            Node(cu.site, cu.links, cu.env, coords=two), Node(pm.site, pm.links, pm.env, (Call(serve),))
        )
        res, finals = terminal_states(state)
        assert finals
        for final, _ in finals:
            assert final.nodes["s_cu"].ts == ((Symbol("result"),), (Symbol("result"),))

    def test_no_provider_blocks_client(self):
        defs = build_request("measurePulse", reply_site="s_r").values()
        client, _ = request_names("measurePulse")
        state = net("node s_cu env { l_pm -> s_pm }\nnode s_pm")
        cu = state.nodes["s_cu"]
        state = NetState(state.nodes, state.defs.merged(defs)).with_nodes(
            Node(cu.site, cu.links, cu.env, coords=[Call(client, (Name("l_pm"),))])
        )
        _, ((final, kind),) = terminal_states(state)
        assert kind == "Deadlocked"
        assert final.nodes["s_cu"].coords[0].action.template[0].var == "data"


class TestListServices:
    def test_self_publish(self):
        state = load("driver_assist").state
        from klaimnet.engine import enabled

        (t,) = enabled(state)
        assert list_services(t.successor, "s_pm") == [ServiceRecord(DESC, 1, "s_pm")]
        assert list_services(state, "s_pm") == []

    def test_shape_filter(self):
        state = net('node s_a ts { ("a", 1, s_b), ("a", 1), ("a", "1", s_b), (`a`, 1, s_b), ("b", 0, s_a), ("a", 1, s_b) }')
        assert list_services(state, "s_a") == [ServiceRecord("a", 1, "s_b"), ServiceRecord("b", 0, "s_a")]

    def test_unknown_site(self):
        with pytest.raises(UnknownSite):
            list_services(net(""), "s_x")
