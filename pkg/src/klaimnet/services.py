"""Service-oriented process patterns: publishing, discovery and request.

A node's registry is the set of ``(description, id, site)`` tuples in its
tuple space. The third field is the provider itself for a node's own
services and, for hop-routed records, the neighbour the record came from.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Optional

from .core import (
    NIL,
    SELF,
    Call,
    Choice,
    Definition,
    Eval,
    Exec,
    Formal,
    In,
    Name,
    NetState,
    Newloc,
    Out,
    Par,
    Prefix,
    Read,
    SiteRef,
    Symbol,
    Term,
    seq,
)

PUBLISH_TAG = "publish"
UNPUBLISHED_TAG = "unpublished"

_SELF = Name(SELF)


class PublishMode(enum.Enum):
    HOP_ROUTED = "hop-routed"  # a forwarded record names the forwarding neighbour
    DIRECT = "direct"  # a forwarded record keeps the provider's site


@dataclass(frozen=True, order=True)
class ServiceRecord:
    description: str
    id: int
    loc: str

    def as_json(self) -> dict:
        return {"description": self.description, "id": self.id, "loc": self.loc}


def _suffix(value) -> str:
    return re.sub(r"\W", "_", str(value))


def provider_name(sid: int, degree: int) -> str:
    return f"PubProvider_{_suffix(sid)}_{degree}"


def receiver_name(sid: int, degree: int) -> str:
    return f"PubReceive_{_suffix(sid)}_{degree}"


def build_publish(desc: str, sid: int, mode: PublishMode = PublishMode.HOP_ROUTED, degrees=range(5)) -> dict:
    """Publishing definitions for nodes with the given numbers of neighbours.

    ``PubProvider_<id>_<k>(n1..nk)`` stores the provider's own record and
    announces it to each neighbour. ``PubReceive_<id>_<k>(n1..nk)`` handles
    one announcement: a node still holding its ``unpublished`` token stores
    the record and re-announces it to every neighbour, a node that already
    has a record drops it. Every node runs one receiver per neighbour, which
    is exactly the number of announcements it will get.
    """
    hop = mode is PublishMode.HOP_ROUTED
    defs = {}
    for k in degrees:
        params = tuple(f"n{i}" for i in range(1, k + 1))
        route = _SELF if hop else Name("route")
        announce = [Out((PUBLISH_TAG, desc, sid, route), Name(n)) for n in params]
        own = [Out((PUBLISH_TAG, desc, sid, _SELF), Name(n)) for n in params]
        provider = seq(Out((desc, sid, _SELF), _SELF), *own, NIL)
        known = Formal("known") if hop else Name("route")
        store = seq(
            In((UNPUBLISHED_TAG, desc, sid), _SELF),
            Out((desc, sid, Name("route")), _SELF),
            *announce,
            NIL,
        )
        drop = seq(Read((desc, sid, known), _SELF), NIL)
        receiver = Prefix(In((PUBLISH_TAG, desc, sid, Formal("route")), _SELF), Choice((store, drop)))
        for d in (Definition(provider_name(sid, k), params, provider), Definition(receiver_name(sid, k), params, receiver)):
            defs[d.name] = d
    return defs


def _neighbour_exprs(state: NetState, site: str) -> tuple:
    node = state.nodes[site]
    exprs = []
    for other in sorted(node.links):
        locs = sorted(loc for loc, s in node.env.items() if s == other)
        exprs.append(Name(locs[0]) if locs else SiteRef(other))
    return tuple(exprs)


def install_publish(
    state: NetState, provider: str, desc: str, sid: int, mode: PublishMode = PublishMode.HOP_ROUTED
) -> NetState:
    """Add the publishing processes for one service to every node of ``state``."""
    state.node(provider)
    degrees = sorted({len(n.links) for n in state.nodes.values()})
    defs = build_publish(desc, sid, mode, degrees)
    changed = []
    for site, node in state.nodes.items():
        nbrs = _neighbour_exprs(state, site)
        k = len(nbrs)
        procs = list(node.procs) + [Call(receiver_name(sid, k), nbrs)] * k
        ts = list(node.ts)
        if site == provider:
            procs.append(Call(provider_name(sid, k), nbrs))
        else:
            ts.append((UNPUBLISHED_TAG, desc, sid))
        changed.append(type(node)(site, node.links, node.env, procs, node.coords, ts))
    merged = NetState(state.nodes, state.defs.merged(defs.values()), state.fresh)
    return merged.with_nodes(*changed)


def discover_name(sid: int) -> str:
    return f"Discover_{_suffix(sid)}"


def build_discover(desc: str, sid: int) -> Definition:
    """The mobile search process ``Discover_<id>(reply)``.

    At a node holding the provider's own record it writes the current site
    to ``reply``; at a node holding a route it moves on along the route.
    """
    name = discover_name(sid)
    found = seq(Read((desc, sid, _SELF), _SELF), Out((_SELF,), Name("reply")), NIL)
    hop = seq(
        Read((desc, sid, Formal("route")), _SELF),
        Eval(Call(name, (Name("reply"),)), Name("route")),
        NIL,
    )
    return Definition(name, ("reply",), Choice((found, hop)))


def discover_caller(
    sid: int,
    cont: Term,
    rest: Term = NIL,
    reply_loc: str = "l_1",
    reply_site: Optional[str] = None,
    result: str = "loc",
) -> Term:
    """Coordinator term launching a discovery from the current node.

    A fresh reply node is created, ``Discover`` is started locally, then the
    node splits into a waiter ``in(!result)@reply.cont`` and ``rest``.
    """
    wait = Prefix(In((Formal(result),), Name(reply_loc)), cont)
    return seq(
        Newloc(reply_loc, reply_site),
        Eval(Call(discover_name(sid), (Name(reply_loc),)), _SELF),
        Par((wait, rest)),
    )


def request_names(service: str) -> tuple:
    return f"Request_{_suffix(service)}", f"Serve_{_suffix(service)}"


def build_request(
    service: str,
    data: str = "pulseData",
    evaluate: str = "evalPulse",
    result: str = "result",
    reply_loc: str = "l_2",
    reply_site: Optional[str] = None,
) -> dict:
    """Client and provider definitions for one service.

    The client (a coordinator, since it creates its reply node) sends
    ``(service, reply)`` to the provider, waits for the data, evaluates it
    and stores the result locally. The provider serves one request and
    re-arms itself in parallel.
    """
    client_name, serve_name = request_names(service)
    client = seq(
        Newloc(reply_loc, reply_site),
        Out((service, Name(reply_loc)), Name("provider")),
        In((Formal("data"),), Name(reply_loc)),
        Exec(evaluate, (Name("data"),)),
        Out((Symbol(result),), _SELF),
        NIL,
    )
    answer = seq(Exec("reqService", (Name("reqService"),)), Out((Symbol(data),), Name("loc")), NIL)
    serve = Prefix(In((Formal("reqService"), Formal("loc")), _SELF), Par((answer, Call(serve_name))))
    return {
        client_name: Definition(client_name, ("provider",), client, coord=True),
        serve_name: Definition(serve_name, (), serve),
    }


def list_services(state: NetState, site: str) -> list:
    node = state.node(site)
    records = {
        ServiceRecord(t[0], t[1], t[2].name)
        for t in node.ts
        if len(t) == 3
        and isinstance(t[0], str)
        and isinstance(t[1], int)
        and not isinstance(t[1], bool)
        and isinstance(t[2], SiteRef)
    }
    return sorted(records)
