"""Regenerate the bundled scenarios that are built from service patterns.

Usage: python3 tools/make_scenarios.py [DEST]   (default: src/klaimnet/scenarios)
"""

import sys
from pathlib import Path

from klaimnet.core import NIL, Call, Name, NetState, Node, SiteRef
from klaimnet.dsl import parse_net, render_net
from klaimnet.services import (
    PublishMode,
    build_discover,
    build_request,
    discover_caller,
    install_publish,
    request_names,
)

DESC = "measure pulse"
SID = 1
SERVICE = "measurePulse"

# The bare four-node in-car net: topology and environments, no processes.
BASE = """
node s_cu links { s_ampl, s_pm } env { l_ampl -> s_ampl, l_pm -> s_pm }
node s_ampl links { s_cu, s_ecg } env { l_cu -> s_cu, l_ecg -> s_ecg }
node s_ecg links { s_ampl, s_pm } env { l_ampl -> s_ampl, l_pm -> s_pm }
node s_pm links { s_cu, s_ecg } env { l_cu -> s_cu, l_ecg -> s_ecg }
"""

# One hop-routed registry contents per node, leading from s_cu to s_pm.
ROUTES = {"s_cu": "s_ampl", "s_ampl": "s_ecg", "s_ecg": "s_pm", "s_pm": "s_pm"}


def header(text: str) -> str:
    return "".join(f"// {line}\n" if line else "//\n" for line in text.strip().splitlines()) + "\n"


def base() -> NetState:
    return parse_net(BASE).state


def publish() -> str:
    state = install_publish(base(), "s_pm", DESC, SID, PublishMode.HOP_ROUTED)
    asserts = "".join(
        f'assert invariant terminal implies ts({s}) count ("measure pulse", 1, !route) == 1\n'
        for s in sorted(state.nodes)
    )
    asserts += "assert invariant terminal implies terminated\n"
    asserts += "assert invariant links_symmetric\n"
    return header(
        """
Generated by tools/make_scenarios.py: hop-routed publishing of the pulse
meter's "measure pulse" service over the four-node in-car net. Each node
keeps the first record it receives and passes the announcement on.
"""
    ) + render_net(state) + "\n" + asserts


def with_registries(state: NetState) -> NetState:
    nodes = [
        Node(s, n.links, n.env, n.procs, n.coords, n.ts + ((DESC, SID, SiteRef(ROUTES[s])),))
        for s, n in state.nodes.items()
    ]
    return state.with_nodes(*nodes)


def discover() -> str:
    state = with_registries(base())
    caller = discover_caller(SID, NIL, reply_site="s_reply")
    cu = state.nodes["s_cu"]
    state = NetState(state.nodes, state.defs.merged([build_discover(DESC, SID)]), state.fresh)
    state = state.with_nodes(Node(cu.site, cu.links, cu.env, cu.procs, (caller,), cu.ts))
    asserts = "assert reachable ts(s_cu.l_1) contains (s_pm)\n"
    asserts += "assert invariant ts(s_cu.l_1) count (!site) == 0 or ts(s_cu.l_1) contains (s_pm)\n"
    return header(
        """
Generated by tools/make_scenarios.py: the controller searches for the
"measure pulse" service. The registries already hold the routes a
hop-routed publish leaves behind, so the search hops ampl, ecg, pm.
The reply goes straight from the pulse meter to the controller's fresh
reply node, which is not linked to it: under --strict this write stalls.
"""
    ) + render_net(state, externals=["s_reply"]) + "\n" + asserts


def request() -> str:
    state = with_registries(base())
    client, serve = request_names(SERVICE)
    defs = list(build_request(SERVICE, reply_site="s_reply2").values()) + [build_discover(DESC, SID)]
    caller = discover_caller(SID, Call(client, (Name("loc"),)), reply_site="s_reply")
    cu, pm = state.nodes["s_cu"], state.nodes["s_pm"]
    state = NetState(state.nodes, state.defs.merged(defs), state.fresh)
    state = state.with_nodes(
        Node(cu.site, cu.links, cu.env, cu.procs, (caller,), cu.ts),
        Node(pm.site, pm.links, pm.env, pm.procs + (Call(serve),), pm.coords, pm.ts),
    )
    asserts = "assert reachable ts(s_cu) contains (`result`)\n"
    return header(
        """
Generated by tools/make_scenarios.py: discovery followed by a request of
the pulse meter's measurePulse service. The controller evaluates the
returned data and stores `result` locally.
"""
    ) + render_net(state, externals=["s_reply", "s_reply2"]) + "\n" + asserts


def main() -> None:
    dest = Path(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent.parent / "src/klaimnet/scenarios")
    for name, make in (("publish", publish), ("discover", discover), ("request", request)):
        (dest / f"{name}.klaim").write_text(make(), encoding="utf-8")


if __name__ == "__main__":
    main()
