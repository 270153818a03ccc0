"""Core data model: values, process terms, nodes and net states.

Everything here is immutable. Process terms are frozen dataclasses, tuple
spaces and process soups are kept as sorted tuples so that a node's
canonical text is a pure function of its contents.
"""

from __future__ import annotations

import hashlib
import json
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Optional, Union

SELF = "self"


# --------------------------------------------------------------------------
# errors


class KlaimError(Exception):
    """Base class for runtime model errors."""


class UnboundLocality(KlaimError):
    def __init__(self, name: str):
        super().__init__(f"unbound locality {name!r}")
        self.name = name


class NotALocality(KlaimError):
    def __init__(self, expr):
        super().__init__(f"{format_expr(expr)} does not denote a site")
        self.expr = expr


class UnknownSite(KlaimError):
    def __init__(self, site: str):
        super().__init__(f"unknown site {site!r}")
        self.site = site


class StrictConnectivity(KlaimError):
    def __init__(self, site: str, target: str):
        super().__init__(f"{site} is not linked to {target}")
        self.site = site
        self.target = target


class ConflictingBind(KlaimError):
    pass


class SelfRebind(KlaimError):
    pass


class DuplicateSite(KlaimError):
    pass


class NotLinked(KlaimError):
    pass


class NotAccepted(KlaimError):
    pass


class StaleTransition(KlaimError):
    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message if index is None else f"step {index}: {message}")
        self.index = index


# --------------------------------------------------------------------------
# values and expressions


@dataclass(frozen=True)
class SiteRef:
    name: str


@dataclass(frozen=True)
class Symbol:
    """Abstract data constant, e.g. `pulseData`."""

    name: str


@dataclass(frozen=True)
class Name:
    """An identifier in value or locality position.

    Bound names are replaced by substitution; whatever is left at run time
    is a locality and resolves through the node's allocation environment.
    """

    ident: str


@dataclass(frozen=True)
class Formal:
    var: str


Value = Union[str, int, SiteRef, Symbol]
Expr = Union[str, int, SiteRef, Symbol, Name]
Field = Union[str, int, SiteRef, Symbol, Name, Formal]


# --------------------------------------------------------------------------
# actions


@dataclass(frozen=True)
class Out:
    fields: tuple
    target: Expr


@dataclass(frozen=True)
class In:
    template: tuple
    target: Expr


@dataclass(frozen=True)
class Read:
    template: tuple
    target: Expr


@dataclass(frozen=True)
class Eval:
    proc: "Term"
    target: Expr


@dataclass(frozen=True)
class Bind:
    loc: str
    site: Expr


@dataclass(frozen=True)
class Newloc:
    loc: str
    site: Optional[str] = None
    coordinator: Optional["Term"] = None


@dataclass(frozen=True)
class Login:
    target: Expr


@dataclass(frozen=True)
class Accept:
    sites: tuple
    wildcard: bool = False

    def admits(self, site: str) -> bool:
        return self.wildcard or site in self.sites


@dataclass(frozen=True)
class Logout:
    target: Expr


@dataclass(frozen=True)
class Exec:
    name: str
    args: tuple = ()


Action = Union[Out, In, Read, Eval, Bind, Newloc, Login, Accept, Logout, Exec]
PRIVILEGED = (Newloc, Login, Accept, Logout)

ACTION_KINDS = {
    Out: "out",
    In: "in",
    Read: "read",
    Eval: "eval",
    Bind: "bind",
    Newloc: "newloc",
    Login: "login",
    Accept: "accept",
    Logout: "logout",
    Exec: "exec",
}


# --------------------------------------------------------------------------
# process terms


@dataclass(frozen=True)
class Nil:
    pass


NIL = Nil()


@dataclass(frozen=True)
class Prefix:
    action: Action
    cont: "Term"


@dataclass(frozen=True)
class Par:
    items: tuple


@dataclass(frozen=True)
class Choice:
    items: tuple


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple = ()


Term = Union[Nil, Prefix, Par, Choice, Call]


def par(*terms: Term) -> Term:
    return normalize(Par(tuple(terms)))


def choice(*terms: Term) -> Term:
    return normalize(Choice(tuple(terms)))


def seq(*actions_then_term) -> Term:
    """``seq(a, b, P)`` builds ``a.b.P``; a trailing action implies ``nil``."""
    items = list(actions_then_term)
    cont: Term = NIL
    if items and isinstance(items[-1], (Nil, Prefix, Par, Choice, Call)):
        cont = items.pop()
    for action in reversed(items):
        cont = Prefix(action, cont)
    return cont


@dataclass(frozen=True)
class Definition:
    name: str
    params: tuple
    body: Term
    coord: bool = False


# --------------------------------------------------------------------------
# canonical text


def format_value(v) -> str:
    if isinstance(v, bool):
        raise TypeError("booleans are not KLAIM values")
    if isinstance(v, str):
        return json.dumps(v, ensure_ascii=False)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, SiteRef):
        return v.name
    if isinstance(v, Symbol):
        return f"`{v.name}`"
    raise TypeError(f"not a value: {v!r}")


def format_expr(e) -> str:
    if isinstance(e, Name):
        return e.ident
    if isinstance(e, Formal):
        return f"!{e.var}"
    return format_value(e)


def format_tuple(items: Iterable) -> str:
    return "(" + ", ".join(format_expr(x) for x in items) + ")"


def format_action(a: Action) -> str:
    if isinstance(a, Out):
        return f"out{format_tuple(a.fields)}@{format_expr(a.target)}"
    if isinstance(a, In):
        return f"in{format_tuple(a.template)}@{format_expr(a.target)}"
    if isinstance(a, Read):
        return f"read{format_tuple(a.template)}@{format_expr(a.target)}"
    if isinstance(a, Eval):
        return f"eval({format_term(a.proc)})@{format_expr(a.target)}"
    if isinstance(a, Bind):
        return f"bind({a.loc}, {format_expr(a.site)})"
    if isinstance(a, Newloc):
        text = a.loc
        if a.site is not None:
            text += f" as {a.site}"
        if a.coordinator is not None:
            text += f", {format_term(a.coordinator)}"
        return f"newloc({text})"
    if isinstance(a, Login):
        return f"login({format_expr(a.target)})"
    if isinstance(a, Accept):
        members = list(a.sites) + (["*"] if a.wildcard else [])
        return "accept{" + ", ".join(members) + "}"
    if isinstance(a, Logout):
        return f"logout({format_expr(a.target)})"
    if isinstance(a, Exec):
        return f"exec {a.name}{format_tuple(a.args)}"
    raise TypeError(f"not an action: {a!r}")


@lru_cache(maxsize=1 << 16)
def format_term(p: Term) -> str:
    if isinstance(p, Nil):
        return "nil"
    if isinstance(p, Prefix):
        return f"{format_action(p.action)}.{format_term(p.cont)}"
    if isinstance(p, Par):
        return "(" + " | ".join(format_term(q) for q in p.items) + ")"
    if isinstance(p, Choice):
        return "(" + " + ".join(format_term(q) for q in p.items) + ")"
    if isinstance(p, Call):
        return f"{p.name}{format_tuple(p.args)}"
    raise TypeError(f"not a process term: {p!r}")


def format_definition(d: Definition) -> str:
    head = "coord def" if d.coord else "def"
    return f"{head} {d.name}({', '.join(d.params)}) =\n    {format_term(d.body)}"


# --------------------------------------------------------------------------
# structural congruence


def _normalize_action(a: Action) -> Action:
    if isinstance(a, Eval):
        return Eval(normalize(a.proc), a.target)
    if isinstance(a, Newloc) and a.coordinator is not None:
        return Newloc(a.loc, a.site, normalize(a.coordinator))
    if isinstance(a, Accept):
        return Accept(tuple(sorted(set(a.sites))), a.wildcard)
    return a


@lru_cache(maxsize=1 << 16)
def normalize(p: Term) -> Term:
    """Flatten and sort Par/Choice, drop nil from Par."""
    if isinstance(p, Prefix):
        return Prefix(_normalize_action(p.action), normalize(p.cont))
    if isinstance(p, Par):
        flat = []
        for q in p.items:
            q = normalize(q)
            if isinstance(q, Par):
                flat.extend(q.items)
            elif not isinstance(q, Nil):
                flat.append(q)
        if not flat:
            return NIL
        if len(flat) == 1:
            return flat[0]
        return Par(tuple(sorted(flat, key=format_term)))
    if isinstance(p, Choice):
        flat = []
        for q in p.items:
            q = normalize(q)
            flat.extend(q.items if isinstance(q, Choice) else (q,))
        if len(flat) == 1:
            return flat[0]
        return Choice(tuple(sorted(flat, key=format_term)))
    return p


def split(p: Term) -> list:
    """Top-level parallel components of ``p`` (after normalization)."""
    p = normalize(p)
    if isinstance(p, Nil):
        return []
    if isinstance(p, Par):
        return list(p.items)
    return [p]


# --------------------------------------------------------------------------
# substitution


def bound_by(a: Action) -> frozenset:
    """Names bound in the continuation of an action."""
    if isinstance(a, (In, Read)):
        return frozenset(f.var for f in a.template if isinstance(f, Formal))
    if isinstance(a, Newloc):
        return frozenset((a.loc,))
    return frozenset()


def _map_expr(e, fn, bound):
    if isinstance(e, Name) and e.ident not in bound:
        r = fn(e.ident)
        if r is not None:
            return r
    return e


def _map_action(a: Action, fn, bound) -> Action:
    m = lambda e: _map_expr(e, fn, bound)  # noqa: E731
    if isinstance(a, Out):
        return Out(tuple(m(x) for x in a.fields), m(a.target))
    if isinstance(a, In):
        return In(tuple(m(x) for x in a.template), m(a.target))
    if isinstance(a, Read):
        return Read(tuple(m(x) for x in a.template), m(a.target))
    if isinstance(a, Eval):
        return Eval(_map_term(a.proc, fn, bound), m(a.target))
    if isinstance(a, Bind):
        return Bind(a.loc, m(a.site))
    if isinstance(a, Newloc):
        if a.coordinator is None:
            return a
        return Newloc(a.loc, a.site, _map_term(a.coordinator, fn, bound | {a.loc}))
    if isinstance(a, (Login, Logout)):
        return type(a)(m(a.target))
    if isinstance(a, Exec):
        return Exec(a.name, tuple(m(x) for x in a.args))
    return a


def _map_term(p: Term, fn: Callable, bound: frozenset) -> Term:
    if isinstance(p, Prefix):
        return Prefix(_map_action(p.action, fn, bound), _map_term(p.cont, fn, bound | bound_by(p.action)))
    if isinstance(p, (Par, Choice)):
        return type(p)(tuple(_map_term(q, fn, bound) for q in p.items))
    if isinstance(p, Call):
        return Call(p.name, tuple(_map_expr(x, fn, bound) for x in p.args))
    return p


def substitute(p: Term, bindings: Mapping) -> Term:
    """Replace free occurrences of bound variables by their values.

    Formal fields and newloc binders shadow outer bindings in their scope.
    """
    if not bindings:
        return p
    return _map_term(p, bindings.get, frozenset())


def free_names(p: Term) -> set:
    """Names occurring free in ``p`` (``self`` included)."""
    found: set = set()

    def note(name):
        found.add(name)
        return None

    _map_term(p, note, frozenset())
    return found


# --------------------------------------------------------------------------
# nodes and nets


def _ts_key(t: tuple) -> str:
    return format_tuple(t)


@dataclass(frozen=True)
class Node:
    """A network node ``s ::_rho^S P`` plus its tuple space.

    ``procs`` holds ordinary processes, ``coords`` the node-coordinator
    processes allowed to perform privileged actions.
    """

    site: str
    links: frozenset = frozenset()
    env: Mapping = field(default_factory=dict)
    procs: tuple = ()
    coords: tuple = ()
    ts: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "links", frozenset(self.links))
        object.__setattr__(self, "env", dict(self.env))
        object.__setattr__(self, "procs", _soup(self.procs))
        object.__setattr__(self, "coords", _soup(self.coords))
        object.__setattr__(self, "ts", tuple(sorted((tuple(t) for t in self.ts), key=_ts_key)))

    def soup(self, coord: bool) -> tuple:
        return self.coords if coord else self.procs

    @property
    def idle(self) -> bool:
        return not self.procs and not self.coords

    @cached_property
    def text(self) -> str:
        lines = [f"node {self.site}"]
        lines.append(_block("links", ", ", sorted(self.links)))
        lines.append(_block("env", ", ", (f"{k} -> {v}" for k, v in sorted(self.env.items()))))
        lines.append(_block("procs", " | ", map(format_term, self.procs)))
        if self.coords:
            lines.append(_block("coord", " | ", map(format_term, self.coords)))
        if self.ts:
            lines.append(_block("ts", ", ", map(format_tuple, self.ts)))
        return "\n".join(lines) + "\n"


def _block(keyword: str, sep: str, items) -> str:
    body = sep.join(items)
    return f"  {keyword} {{ {body} }}" if body else f"  {keyword} {{ }}"


def _soup(items) -> tuple:
    out = []
    for p in items:
        out.extend(split(p))
    return tuple(sorted(out, key=format_term))


class DefTable(Mapping):
    """Read-only table of process definitions, keyed by name."""

    def __init__(self, defs: Union[Mapping, Iterable] = ()):
        if isinstance(defs, Mapping):
            defs = defs.values()
        self._defs = {}
        for d in defs:
            self._defs[d.name] = Definition(d.name, tuple(d.params), normalize(d.body), d.coord)

    def __getitem__(self, name):
        return self._defs[name]

    def __iter__(self) -> Iterator:
        return iter(self._defs)

    def __len__(self):
        return len(self._defs)

    def merged(self, extra: Iterable) -> "DefTable":
        table = dict(self._defs)
        for d in extra:
            table[d.name] = d
        return DefTable(table)

    @cached_property
    def text(self) -> str:
        return "".join(format_definition(self._defs[n]) + "\n" for n in sorted(self._defs))


@dataclass(frozen=True, eq=False)
class NetState:
    """The whole network configuration, the unit of exploration."""

    nodes: Mapping
    defs: DefTable = field(default_factory=DefTable)
    fresh: int = 0

    def __post_init__(self):
        object.__setattr__(self, "nodes", dict(sorted(self.nodes.items())))
        if not isinstance(self.defs, DefTable):
            object.__setattr__(self, "defs", DefTable(self.defs))

    @cached_property
    def text(self) -> str:
        parts = []
        if self.fresh:
            parts.append(f"fresh {self.fresh}\n")
        if self.defs:
            parts.append(self.defs.text)
        parts.extend(n.text for n in self.nodes.values())
        return "\n".join(parts)

    @cached_property
    def canonical(self) -> bytes:
        return f"fresh {self.fresh}\n{self.defs.text}\n".encode() + "".join(
            n.text for n in self.nodes.values()
        ).encode()

    @cached_property
    def digest(self) -> bytes:
        return hashlib.blake2b(self.canonical, digest_size=16).digest()

    def __eq__(self, other):
        return isinstance(other, NetState) and self.canonical == other.canonical

    def __hash__(self):
        return hash(self.digest)

    def node(self, site: str) -> Node:
        try:
            return self.nodes[site]
        except KeyError:
            raise UnknownSite(site) from None

    def with_nodes(self, *nodes: Node, fresh: Optional[int] = None) -> "NetState":
        table = dict(self.nodes)
        for n in nodes:
            table[n.site] = n
        return NetState(table, self.defs, self.fresh if fresh is None else fresh)

    @property
    def terminated(self) -> bool:
        return all(n.idle for n in self.nodes.values())


def canonical_form(state: NetState) -> bytes:
    return state.canonical


def links_symmetric(state: NetState) -> bool:
    for site, node in state.nodes.items():
        if site in node.links:
            return False
        for other in node.links:
            peer = state.nodes.get(other)
            if peer is not None and site not in peer.links:
                return False
    return True


# --------------------------------------------------------------------------
# resolution and matching


def resolve(le, node: Node) -> str:
    """Resolve a locality expression to a site name."""
    if isinstance(le, SiteRef):
        return le.name
    if isinstance(le, Name):
        if le.ident == SELF:
            return node.site
        try:
            return node.env[le.ident]
        except KeyError:
            raise UnboundLocality(le.ident) from None
    raise NotALocality(le)


def resolve_value(e, node: Optional[Node]):
    if isinstance(e, Name):
        if node is None:
            raise UnboundLocality(e.ident)
        return SiteRef(resolve(e, node))
    return e


def resolve_tuple(fields: Iterable, node: Optional[Node]) -> tuple:
    return tuple(resolve_value(e, node) for e in fields)


def close_term(p: Term, node: Node, keep_self: bool = False) -> Term:
    """Resolve every free locality of ``p`` through ``node``'s environment."""

    def fn(name):
        if keep_self and name == SELF:
            return None
        return resolve_value(Name(name), node)

    return _map_term(p, fn, frozenset())


def match_template(template: tuple, tup: tuple, node: Optional[Node] = None) -> Optional[dict]:
    """Match a tuple against a template.

    Actual fields are resolved through ``node`` first. Returns the bindings
    of the formal fields, or None if the tuple does not match.
    """
    if len(template) != len(tup):
        return None
    bindings = {}
    for f, v in zip(template, tup):
        if isinstance(f, Formal):
            bindings[f.var] = v
        elif resolve_value(f, node) != v:
            return None
    return bindings
