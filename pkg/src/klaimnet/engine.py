"""Small-step interleaving semantics.

``enabled`` lists every transition of a state; each transition carries its
successor. The ``apply_*`` functions implement the effect of one action on
a state whose acting process has already been taken out of its soup; the
plumbing in ``_fire`` removes the acting process, applies the effect and
puts the continuation back.
"""

from __future__ import annotations

import dataclasses
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional

from .core import (
    PRIVILEGED,
    SELF,
    Accept,
    Bind,
    Call,
    Choice,
    ConflictingBind,
    DuplicateSite,
    Eval,
    Exec,
    In,
    KlaimError,
    Login,
    Logout,
    NetState,
    Newloc,
    Node,
    NotAccepted,
    NotLinked,
    Out,
    Par,
    Prefix,
    Read,
    SelfRebind,
    SiteRef,
    StaleTransition,
    StrictConnectivity,
    Term,
    UnknownSite,
    close_term,
    format_term,
    format_tuple,
    links_symmetric,
    match_template,
    resolve,
    resolve_tuple,
    resolve_value,
    split,
    substitute,
)

# Definition unfolding deeper than this means an unguarded recursion slipped
# past the static checks (e.g. a programmatically built net).
MAX_UNFOLD = 256


@dataclass(frozen=True)
class EngineConfig:
    strict: bool = False
    faults: bool = False


DEFAULT = EngineConfig()


class Step(NamedTuple):
    """A transition label: acting site, action text, rendezvous partner."""

    site: str
    action: str
    partner: Optional[str] = None

    @property
    def kind(self) -> str:
        return self.action.split("(", 1)[0].split(" ", 1)[0]


@dataclass(frozen=True)
class Transition:
    site: str
    kind: str
    action: str
    partner: Optional[str]
    target: Optional[str]
    successor: NetState = field(compare=False, repr=False)

    @property
    def label(self) -> Step:
        return Step(self.site, self.action, self.partner)


@dataclass
class Trace:
    """A replayable sequence of transition labels."""

    seed: Optional[int]
    steps: list = field(default_factory=list)


# --------------------------------------------------------------------------
# node / soup plumbing


def _consume(state: NetState, site: str, coord: bool, item: Term) -> NetState:
    node = state.nodes[site]
    soup = list(node.soup(coord))
    soup.remove(item)
    key = "coords" if coord else "procs"
    return state.with_nodes(dataclasses.replace(node, **{key: tuple(soup)}))


def _spawn(state: NetState, site: str, coord: bool, term: Term) -> NetState:
    parts = split(term)
    if not parts:
        return state
    node = state.nodes[site]
    key = "coords" if coord else "procs"
    return state.with_nodes(dataclasses.replace(node, **{key: node.soup(coord) + tuple(parts)}))


def _target(state: NetState, node: Node, le, cfg: EngineConfig) -> str:
    target = resolve(le, node)
    if target not in state.nodes:
        raise UnknownSite(target)
    if cfg.strict and target != node.site and target not in node.links:
        raise StrictConnectivity(node.site, target)
    return target


# --------------------------------------------------------------------------
# action effects


def apply_out(state: NetState, site: str, fields: tuple, target, cfg: EngineConfig = DEFAULT) -> NetState:
    """Write the resolved tuple into the target's tuple space."""
    node = state.node(site)
    dest = _target(state, node, target, cfg)
    tup = resolve_tuple(fields, node)
    peer = state.nodes[dest]
    return state.with_nodes(dataclasses.replace(peer, ts=peer.ts + (tup,)))


def _retrieve(state, site, template, target, cfg, consume):
    node = state.node(site)
    dest = _target(state, node, target, cfg)
    peer = state.nodes[dest]
    results = []
    seen = set()
    for i, tup in enumerate(peer.ts):
        if tup in seen:
            continue
        seen.add(tup)
        bindings = match_template(template, tup, node)
        if bindings is None:
            continue
        if consume:
            after = state.with_nodes(dataclasses.replace(peer, ts=peer.ts[:i] + peer.ts[i + 1 :]))
        else:
            after = state
        results.append((after, bindings, tup))
    return dest, results


def apply_in(state: NetState, site: str, template: tuple, target, cfg: EngineConfig = DEFAULT) -> list:
    """One ``(state, bindings, tuple)`` per distinct matching tuple, each removed."""
    return _retrieve(state, site, template, target, cfg, consume=True)[1]


def apply_read(state: NetState, site: str, template: tuple, target, cfg: EngineConfig = DEFAULT) -> list:
    return _retrieve(state, site, template, target, cfg, consume=False)[1]


def apply_eval(state: NetState, site: str, proc: Term, target, cfg: EngineConfig = DEFAULT) -> NetState:
    """Ship ``proc`` to the target, its localities resolved at the sender."""
    node = state.node(site)
    dest = _target(state, node, target, cfg)
    return _spawn(state, dest, False, close_term(proc, node))


def apply_bind(state: NetState, site: str, loc: str, site_expr) -> NetState:
    if loc == SELF:
        raise SelfRebind("self cannot be rebound")
    node = state.node(site)
    bound = resolve(site_expr, node)
    current = node.env.get(loc)
    if current == bound:
        return state
    if current is not None:
        raise ConflictingBind(f"{loc} already bound to {current}")
    return state.with_nodes(dataclasses.replace(node, env={**node.env, loc: bound}))


def apply_newloc(state: NetState, site: str, loc: str, name: Optional[str] = None, coordinator: Optional[Term] = None) -> tuple:
    """Create a node; returns ``(state, new_site)``.

    The new node is linked to its creator, its environment holds only the
    implicit ``self`` and its coordinator (if any) is installed with free
    localities other than ``self`` resolved at the creator.
    """
    fresh = state.fresh
    if name is not None:
        if name in state.nodes:
            raise DuplicateSite(name)
        new = name
    else:
        new = f"s#{fresh}"
        fresh += 1
        while new in state.nodes:
            new = f"s#{fresh}"
            fresh += 1
    creator = state.node(site)
    creator = dataclasses.replace(creator, env={**creator.env, loc: new}, links=creator.links | {new})
    coords = ()
    if coordinator is not None:
        coords = (close_term(substitute(coordinator, {loc: SiteRef(new)}), creator, keep_self=True),)
    born = Node(new, links={site}, coords=coords)
    return state.with_nodes(creator, born, fresh=fresh), new


def apply_login_accept(state: NetState, login_site: str, target, accept_site: str, accept: Accept) -> NetState:
    node = state.node(login_site)
    dest = resolve(target, node)
    if dest != accept_site:
        raise NotAccepted(f"login targets {dest}, not {accept_site}")
    if accept_site == login_site:
        raise NotAccepted("a node cannot log into itself")
    peer = state.node(accept_site)
    if not accept.admits(login_site):
        raise NotAccepted(f"{accept_site} does not accept {login_site}")
    return state.with_nodes(
        dataclasses.replace(node, links=node.links | {accept_site}),
        dataclasses.replace(peer, links=peer.links | {login_site}),
    )


def apply_logout(state: NetState, site: str, target) -> NetState:
    node = state.node(site)
    dest = resolve(target, node)
    changed = [dataclasses.replace(node, links=node.links - {dest})]
    peer = state.nodes.get(dest)
    if peer is not None:
        changed.append(dataclasses.replace(peer, links=peer.links - {site}))
    return state.with_nodes(*changed)


def apply_exec(state: NetState, site: str, name: str, args: tuple) -> tuple:
    """Internal step; returns ``(state, resolved_args)`` with state unchanged."""
    return state, resolve_tuple(args, state.node(site))


def apply_link_failure(state: NetState, site_a: str, site_b: str) -> NetState:
    a, b = state.node(site_a), state.node(site_b)
    if site_b not in a.links:
        raise NotLinked(f"{site_a} and {site_b} are not linked")
    return state.with_nodes(
        dataclasses.replace(a, links=a.links - {site_b}),
        dataclasses.replace(b, links=b.links - {site_a}),
    )


# --------------------------------------------------------------------------
# enabled transitions


def heads(term: Term, node: Node, defs, coord: bool, depth: int = 0) -> Iterator[tuple]:
    """First executable actions of ``term`` with the term each one leaves."""
    if isinstance(term, Prefix):
        if coord or not isinstance(term.action, PRIVILEGED):
            yield term.action, term.cont
    elif isinstance(term, Choice):
        for item in term.items:
            yield from heads(item, node, defs, coord, depth)
    elif isinstance(term, Par):
        items = term.items
        for i, item in enumerate(items):
            for action, cont in heads(item, node, defs, coord, depth):
                yield action, Par(items[:i] + (cont,) + items[i + 1 :])
    elif isinstance(term, Call):
        body = unfold(term, node, defs, coord)
        if body is not None and depth < MAX_UNFOLD:
            yield from heads(body, node, defs, coord, depth + 1)


def unfold(call: Call, node: Node, defs, coord: bool) -> Optional[Term]:
    d = defs.get(call.name)
    if d is None or len(d.params) != len(call.args) or (d.coord and not coord):
        return None
    try:
        args = [resolve_value(a, node) for a in call.args]
    except KlaimError:
        return None
    return substitute(d.body, dict(zip(d.params, args)))


def _fire(state, node, coord, item, action, cont, cfg) -> list:
    site = node.site
    base = _consume(state, site, coord, item)

    def done(kind, text, after, cont_term, target=None, partner=None):
        return Transition(site, kind, text, partner, target, _spawn(after, site, coord, cont_term))

    try:
        if isinstance(action, Out):
            dest = _target(state, node, action.target, cfg)
            tup = resolve_tuple(action.fields, node)
            after = apply_out(base, site, action.fields, action.target, cfg)
            return [done("out", f"out{format_tuple(tup)}@{dest}", after, cont, dest)]
        if isinstance(action, (In, Read)):
            kind = "in" if isinstance(action, In) else "read"
            dest, results = _retrieve(base, site, action.template, action.target, cfg, kind == "in")
            return [
                done(kind, f"{kind}{format_tuple(tup)}@{dest}", after, substitute(cont, b), dest)
                for after, b, tup in results
            ]
        if isinstance(action, Eval):
            dest = _target(state, node, action.target, cfg)
            shipped = close_term(action.proc, node)
            after = apply_eval(base, site, action.proc, action.target, cfg)
            return [done("eval", f"eval({format_term(shipped)})@{dest}", after, cont, dest)]
        if isinstance(action, Bind):
            bound = resolve(action.site, node)
            after = apply_bind(base, site, action.loc, action.site)
            return [done("bind", f"bind({action.loc}, {bound})", after, cont)]
        if isinstance(action, Newloc):
            after, new = apply_newloc(base, site, action.loc, action.site, action.coordinator)
            rest = substitute(cont, {action.loc: SiteRef(new)})
            return [done("newloc", f"newloc({action.loc} as {new})", after, rest, new)]
        if isinstance(action, Login):
            return _rendezvous(state, base, node, coord, item, action, cont)
        if isinstance(action, Logout):
            dest = resolve(action.target, node)
            after = apply_logout(base, site, action.target)
            return [done("logout", f"logout({dest})", after, cont, dest)]
        if isinstance(action, Exec):
            after, args = apply_exec(base, site, action.name, action.args)
            return [done("exec", f"exec {action.name}{format_tuple(args)}", after, cont)]
    except KlaimError:
        return []
    return []  # Accept only fires inside a rendezvous


def _rendezvous(state, base, node, coord, item, action, cont) -> list:
    dest = resolve(action.target, node)
    peer = state.nodes.get(dest)
    if peer is None or dest == node.site:
        return []
    found = []
    for other in _unique(peer.coords):
        for acc, acc_cont in heads(other, peer, state.defs, True):
            if not isinstance(acc, Accept) or not acc.admits(node.site):
                continue
            after = _consume(base, dest, True, other)
            after = apply_login_accept(after, node.site, action.target, dest, acc)
            after = _spawn(after, dest, True, acc_cont)
            after = _spawn(after, node.site, coord, cont)
            found.append(Transition(node.site, "login", f"login({dest})", dest, dest, after))
    return found


def _unique(soup: tuple) -> list:
    out = []
    for p in soup:
        if not out or out[-1] != p:
            out.append(p)
    return out


def _variant_key(t: Transition) -> tuple:
    succ = t.successor
    return succ.fresh, tuple((site, n.text) for site, n in succ.nodes.items())


def enabled(state: NetState, cfg: EngineConfig = DEFAULT) -> list:
    """All transitions of ``state``, sorted by label.

    Transitions sharing a label but reaching different states get a
    `` [k]`` suffix (k counted in successor order) so labels stay unique.
    """
    found = []
    for site, node in state.nodes.items():
        for coord in (False, True):
            for item in _unique(node.soup(coord)):
                for action, cont in heads(item, node, state.defs, coord):
                    found.extend(_fire(state, node, coord, item, action, cont, cfg))
    if cfg.faults:
        for site, node in state.nodes.items():
            for other in sorted(node.links):
                if site < other and other in state.nodes:
                    after = apply_link_failure(state, site, other)
                    found.append(Transition(site, "fault", f"fault({site}, {other})", other, other, after))
    groups = defaultdict(dict)
    for t in found:
        groups[t.label].setdefault(t.successor.canonical, t)
    result = []
    for label in sorted(groups, key=lambda s: (s.site, s.action, s.partner or "")):
        variants = groups[label]
        if len(variants) == 1:
            result.extend(variants.values())
            continue
        # order node by node so adding an unrelated node never renumbers variants
        ordered = sorted(variants.values(), key=_variant_key)
        for k, t in enumerate(ordered, start=1):
            result.append(dataclasses.replace(t, action=f"{t.action} [{k}]"))
    return result


def step(state: NetState, label, cfg: EngineConfig = DEFAULT) -> NetState:
    """Take the enabled transition with the given label (or Transition)."""
    if isinstance(label, Transition):
        label = label.label
    label = Step(*label)
    for t in enabled(state, cfg):
        if t.label == label:
            assert links_symmetric(t.successor), "link symmetry violated"
            return t.successor
    raise StaleTransition(f"{label.site}: {label.action} is not enabled")
