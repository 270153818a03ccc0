"""Textual net descriptions: lexer, recursive-descent parser, static checks
and renderers.

Files contain definitions, node declarations and assertions::

    coord def Coord() = accept{s_ampl, s_pm}.Coord()

    node s_cu
      links { s_ampl }
      env { l_ampl -> s_ampl }
      procs { out("hello", self)@l_ampl.nil }
      coord { Coord() }
      ts { ("measure pulse", 1, s_pm) }

    assert reachable ts(s_ampl) contains ("hello", s_cu)

Identifiers of the form ``s_xxx`` (or engine-generated ``s#n``) are sites;
every other identifier in value position is a variable or a locality.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

from .core import (
    NIL,
    SELF,
    Accept,
    Bind,
    Call,
    Choice,
    Definition,
    DefTable,
    Eval,
    Exec,
    Formal,
    In,
    Login,
    Logout,
    Name,
    NetState,
    Newloc,
    Node,
    Out,
    Par,
    Prefix,
    Read,
    SiteRef,
    Symbol,
    Term,
    format_tuple,
)
from .engine import Step, Trace

EXTENSIONS = frozenset({"open-accept"})

KEYWORDS = frozenset(
    """nil out in read eval bind newloc login accept logout exec def coord node
    links env procs ts assert external fresh as""".split()
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<symbol>`[A-Za-z_][A-Za-z0-9_]*`)
  | (?P<site>s_[A-Za-z0-9_]+|s\#[0-9]+)
  | (?P<int>-?[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|==|!=|<=|>=|[(){},.|+@!*=<>])
    """,
    re.VERBOSE,
)

_TOP_LEVEL = frozenset({"def", "node", "assert", "external", "fresh"})


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int
    length: int

    def __str__(self):
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    span: SourceSpan
    message: str
    severity: str = "error"

    def __str__(self):
        return f"{self.span}: {self.severity}: {self.message}"


class ParseErrors(Exception):
    def __init__(self, diagnostics: list):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


# --------------------------------------------------------------------------
# assertions


@dataclass(frozen=True)
class SiteSel:
    """A site, optionally followed by a locality of that site's env."""

    site: str
    loc: Optional[str] = None

    def __str__(self):
        return self.site if self.loc is None else f"{self.site}.{self.loc}"


@dataclass(frozen=True)
class TruePred:
    value: bool = True


@dataclass(frozen=True)
class TupleAt:
    site: SiteSel
    template: tuple


@dataclass(frozen=True)
class TupleCount:
    site: SiteSel
    template: tuple
    op: str
    count: int


@dataclass(frozen=True)
class Link:
    a: SiteSel
    b: SiteSel


@dataclass(frozen=True)
class StatePred:
    """``no_deadlock``, ``terminated``, ``terminal`` or ``links_symmetric``."""

    name: str


@dataclass(frozen=True)
class ActionEnabled:
    kind: str
    site: SiteSel
    target: Optional[SiteSel] = None


@dataclass(frozen=True)
class Not:
    arg: "Predicate"


@dataclass(frozen=True)
class And:
    items: tuple


@dataclass(frozen=True)
class Or:
    items: tuple


@dataclass(frozen=True)
class Implies:
    premise: "Predicate"
    conclusion: "Predicate"


Predicate = Union[TruePred, TupleAt, TupleCount, Link, StatePred, ActionEnabled, Not, And, Or, Implies]
STATE_PREDICATES = ("no_deadlock", "terminated", "terminal", "links_symmetric")
MODES = ("reachable", "invariant", "blocked_forever")
COMPARISONS = ("==", "!=", "<=", ">=", "<", ">")


@dataclass(frozen=True)
class Assertion:
    mode: str
    predicate: Predicate
    span: Optional[SourceSpan] = None

    def __str__(self):
        return f"{self.mode} {format_predicate(self.predicate)}"


def _sites_of(p: Predicate):
    if isinstance(p, (TupleAt, TupleCount)):
        yield p.site
    elif isinstance(p, Link):
        yield from (p.a, p.b)
    elif isinstance(p, ActionEnabled):
        yield p.site
        if p.target is not None:
            yield p.target
    elif isinstance(p, Not):
        yield from _sites_of(p.arg)
    elif isinstance(p, (And, Or)):
        for q in p.items:
            yield from _sites_of(q)
    elif isinstance(p, Implies):
        yield from _sites_of(p.premise)
        yield from _sites_of(p.conclusion)


def format_predicate(p: Predicate, nested: bool = False) -> str:
    if isinstance(p, TruePred):
        return "true" if p.value else "false"
    if isinstance(p, TupleAt):
        return f"ts({p.site}) contains {format_tuple(p.template)}"
    if isinstance(p, TupleCount):
        return f"ts({p.site}) count {format_tuple(p.template)} {p.op} {p.count}"
    if isinstance(p, Link):
        return f"link({p.a}, {p.b})"
    if isinstance(p, StatePred):
        return p.name
    if isinstance(p, ActionEnabled):
        extra = "" if p.target is None else f", {p.target}"
        return f"action({p.kind}, {p.site}{extra})"
    if isinstance(p, Not):
        return "not " + format_predicate(p.arg, True)
    if isinstance(p, (And, Or)):
        op = " and " if isinstance(p, And) else " or "
        text = op.join(format_predicate(q, True) for q in p.items)
    elif isinstance(p, Implies):
        text = f"{format_predicate(p.premise, True)} implies {format_predicate(p.conclusion, True)}"
    else:
        raise TypeError(p)
    return f"({text})" if nested else text


# --------------------------------------------------------------------------
# lexer


class Token(NamedTuple):
    kind: str
    text: str
    line: int
    col: int
    offset: int


def tokenize(text: str, filename: str = "<string>") -> list:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            span = SourceSpan(filename, line, pos - line_start + 1, 1)
            raise ParseErrors([Diagnostic(span, f"unexpected character {text[pos]!r}")])
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            tokens.append(Token(kind, chunk, line, pos - line_start + 1, pos))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    return tokens


# --------------------------------------------------------------------------
# parser


class _Syntax(Exception):
    def __init__(self, diag: Diagnostic):
        self.diag = diag


@dataclass(frozen=True)
class _Ctx:
    desc: str
    coord: bool
    def_name: Optional[str] = None


class ParseResult(NamedTuple):
    state: NetState
    assertions: list
    warnings: list
    externals: frozenset


class _Parser:
    def __init__(self, text: str, filename: str, extensions: frozenset):
        self.text = text
        self.filename = filename
        self.extensions = extensions
        self.toks = tokenize(text, filename)
        self.i = 0
        self.errors: list = []
        self.warnings: list = []
        self.defs: dict = {}
        self.def_spans: dict = {}
        self.nodes: dict = {}
        self.node_spans: dict = {}
        self.assertions: list = []
        self.externals: dict = {}
        self.fresh = 0
        self.calls: list = []
        self.privileged: list = []
        self.ctx = _Ctx("top level", False)
        self.guarded = False

    # -- token helpers

    def span(self, tok: Optional[Token] = None) -> SourceSpan:
        if tok is None:
            tok = self.peek()
        if tok is None:
            last = self.toks[-1] if self.toks else None
            if last is None:
                return SourceSpan(self.filename, 1, 1, 0)
            return SourceSpan(self.filename, last.line, last.col, len(last.text))
        return SourceSpan(self.filename, tok.line, tok.col, len(tok.text))

    def peek(self, ahead: int = 0) -> Optional[Token]:
        j = self.i + ahead
        return self.toks[j] if j < len(self.toks) else None

    def fail(self, message: str, tok: Optional[Token] = None):
        raise _Syntax(Diagnostic(self.span(tok), message))

    def at(self, text: str, ahead: int = 0) -> bool:
        tok = self.peek(ahead)
        return tok is not None and tok.text == text and tok.kind in ("op", "ident")

    def accept(self, text: str) -> Optional[Token]:
        if self.at(text):
            tok = self.toks[self.i]
            self.i += 1
            return tok
        return None

    def expect(self, text: str) -> Token:
        tok = self.accept(text)
        if tok is None:
            found = self.peek()
            self.fail(f"expected {text!r}, found {found.text!r}" if found else f"expected {text!r} at end of input")
        return tok

    def take(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != kind or (kind == "ident" and tok.text in KEYWORDS):
            self.fail(f"expected {what}, found {tok.text!r}" if tok else f"expected {what} at end of input")
        self.i += 1
        return tok

    def error(self, span: SourceSpan, message: str):
        self.errors.append(Diagnostic(span, message))

    def warn(self, span: SourceSpan, message: str):
        self.warnings.append(Diagnostic(span, message, "warning"))

    def comma_list(self, close: str, item):
        out = []
        if self.accept(close):
            return out
        while True:
            out.append(item())
            if self.accept(close):
                return out
            self.expect(",")

    def at_top_level(self) -> bool:
        tok = self.peek()
        if tok is None:
            return True
        if tok.kind == "ident" and tok.text in _TOP_LEVEL:
            return True
        return self.at("coord") and self.at("def", 1)

    def sync(self):
        self.i += 1
        while not self.at_top_level():
            self.i += 1

    # -- declarations

    def parse(self):
        while self.peek() is not None:
            try:
                tok = self.peek()
                if self.at("def") or (self.at("coord") and self.at("def", 1)):
                    self.parse_def()
                elif self.at("node"):
                    self.parse_node()
                elif self.at("assert"):
                    self.parse_assert()
                elif self.at("external"):
                    self.i += 1
                    for t in self.comma_free_sites():
                        self.externals.setdefault(t.text, self.span(t))
                elif self.at("fresh"):
                    self.i += 1
                    self.fresh = max(self.fresh, int(self.take("int", "an integer").text))
                else:
                    self.fail(f"expected a declaration, found {tok.text!r}")
            except _Syntax as e:
                self.errors.append(e.diag)
                self.sync()

    def comma_free_sites(self):
        out = [self.take("site", "a site")]
        while self.accept(","):
            out.append(self.take("site", "a site"))
        return out

    def parse_def(self):
        coord = self.accept("coord") is not None
        self.expect("def")
        name_tok = self.take("ident", "a definition name")
        name = name_tok.text
        self.expect("(")
        params = self.comma_list(")", lambda: self.take("ident", "a parameter name"))
        seen = set()
        for p in params:
            if p.text in seen:
                self.error(self.span(p), f"duplicate parameter {p.text!r} in definition {name!r}")
            seen.add(p.text)
        self.expect("=")
        kind = "coordinator definition" if coord else "definition"
        self.ctx = _Ctx(f"{kind} {name!r}", coord, name)
        self.guarded = False
        body = self.parse_proc()
        if name in self.defs:
            self.error(self.span(name_tok), f"duplicate definition {name!r}")
            return
        self.defs[name] = Definition(name, tuple(p.text for p in params), body, coord)
        self.def_spans[name] = self.span(name_tok)

    def parse_node(self):
        self.expect("node")
        site_tok = self.take("site", "a site")
        site = site_tok.text
        blocks = {}
        while True:
            tok = self.peek()
            if tok is None or tok.text not in ("links", "env", "procs", "coord", "ts") or self.at("def", 1):
                break
            self.i += 1
            if tok.text in blocks:
                self.error(self.span(tok), f"duplicate {tok.text!r} block in node {site}")
            self.expect("{")
            if tok.text == "links":
                blocks["links"] = self.comma_list("}", lambda: self.take("site", "a site"))
            elif tok.text == "env":
                blocks["env"] = self.comma_list("}", self.env_entry)
            elif tok.text == "ts":
                blocks["ts"] = self.comma_list("}", self.ts_tuple)
            else:
                coord = tok.text == "coord"
                self.ctx = _Ctx(f"node {site} {tok.text}", coord)
                self.guarded = False
                blocks[tok.text] = [] if self.accept("}") else [self.parse_proc()]
                if blocks[tok.text]:
                    self.expect("}")
        if site in self.nodes:
            self.error(self.span(site_tok), f"duplicate node {site}")
            return
        env = {}
        for loc_tok, target in blocks.get("env", []):
            loc = loc_tok.text
            if loc == SELF:
                self.error(self.span(loc_tok), "'self' is implicit and cannot be bound in an environment")
            elif loc in env and env[loc] != target:
                self.error(self.span(loc_tok), f"locality {loc} mapped to two sites")
            else:
                env[loc] = target
        links = []
        for t in blocks.get("links", []):
            if t.text == site:
                self.error(self.span(t), f"node {site} cannot link to itself")
            else:
                links.append(t)
        self.node_spans[site] = self.span(site_tok)
        self.nodes[site] = (
            [t.text for t in links],
            {t.text: self.span(t) for t in links},
            env,
            blocks.get("procs", []),
            blocks.get("coord", []),
            blocks.get("ts", []),
        )

    def env_entry(self):
        loc = self.peek()
        if loc is None or loc.kind != "ident" or (loc.text in KEYWORDS):
            self.fail("expected a locality name")
        self.i += 1
        self.expect("->")
        return loc, self.take("site", "a site").text

    def ts_tuple(self):
        self.expect("(")
        return tuple(self.comma_list(")", self.literal))

    def literal(self):
        tok = self.peek()
        if tok is None:
            self.fail("expected a value at end of input")
        if tok.kind in ("string", "int", "site", "symbol"):
            self.i += 1
            return self.atom_value(tok)
        self.fail(f"expected a literal value, found {tok.text!r}")

    def atom_value(self, tok: Token):
        if tok.kind == "string":
            return json.loads(tok.text)
        if tok.kind == "int":
            return int(tok.text)
        if tok.kind == "site":
            return SiteRef(tok.text)
        if tok.kind == "symbol":
            return Symbol(tok.text[1:-1])
        raise AssertionError(tok)

    # -- processes

    def parse_proc(self) -> Term:
        items = [self.parse_choice()]
        while self.accept("|"):
            items.append(self.parse_choice())
        return items[0] if len(items) == 1 else Par(tuple(items))

    def parse_choice(self) -> Term:
        items = [self.parse_seq()]
        while self.accept("+"):
            items.append(self.parse_seq())
        return items[0] if len(items) == 1 else Choice(tuple(items))

    def parse_seq(self) -> Term:
        tok = self.peek()
        if tok is None:
            self.fail("expected a process at end of input")
        if tok.kind == "ident" and tok.text in ACTIONS:
            action = self.parse_action()
            if not self.accept("."):
                return Prefix(action, NIL)
            saved = self.guarded
            self.guarded = True
            try:
                cont = self.parse_seq()
            finally:
                self.guarded = saved
            return Prefix(action, cont)
        if self.accept("nil"):
            return NIL
        if self.accept("("):
            p = self.parse_proc()
            self.expect(")")
            return p
        if tok.kind == "ident" and tok.text not in KEYWORDS:
            self.i += 1
            self.expect("(")
            args = self.comma_list(")", self.expr)
            self.calls.append((self.ctx, tok.text, len(args), self.span(tok), self.guarded))
            return Call(tok.text, tuple(args))
        self.fail(f"expected a process, found {tok.text!r}")

    def nested(self, ctx: _Ctx) -> Term:
        saved = self.ctx, self.guarded
        self.ctx, self.guarded = ctx, True
        try:
            return self.parse_proc()
        finally:
            self.ctx, self.guarded = saved

    def expr(self):
        tok = self.peek()
        if tok is None:
            self.fail("expected an expression at end of input")
        if tok.kind in ("string", "int", "site", "symbol"):
            self.i += 1
            return self.atom_value(tok)
        if tok.kind == "ident" and tok.text not in KEYWORDS:
            self.i += 1
            return Name(tok.text)
        self.fail(f"expected an expression, found {tok.text!r}")

    def field(self):
        if self.accept("!"):
            return Formal(self.take("ident", "a variable name").text)
        return self.expr()

    def target(self):
        self.expect("@")
        return self.expr()

    def parse_action(self):
        tok = self.toks[self.i]
        self.i += 1
        kw = tok.text
        if kw in ("newloc", "login", "accept", "logout"):
            self.privileged.append((self.ctx, kw, self.span(tok)))
        if kw == "out":
            self.expect("(")
            fields = self.comma_list(")", self.expr)
            return Out(tuple(fields), self.target())
        if kw in ("in", "read"):
            self.expect("(")
            start = self.peek()
            template = self.comma_list(")", self.field)
            formals = [f.var for f in template if isinstance(f, Formal)]
            if len(formals) != len(set(formals)):
                self.error(self.span(start), "formal fields of a template must be distinct")
            cls = In if kw == "in" else Read
            return cls(tuple(template), self.target())
        if kw == "eval":
            self.expect("(")
            proc = self.nested(_Ctx(f"{self.ctx.desc} (eval argument)", False, self.ctx.def_name))
            self.expect(")")
            return Eval(proc, self.target())
        if kw == "bind":
            self.expect("(")
            loc = self.take("ident", "a locality name")
            if loc.text == SELF:
                self.error(self.span(loc), "'self' cannot be rebound")
            self.expect(",")
            site = self.expr()
            self.expect(")")
            return Bind(loc.text, site)
        if kw == "newloc":
            self.expect("(")
            loc = self.take("ident", "a locality name")
            name = None
            if self.accept("as"):
                name = self.take("site", "a site").text
            else:
                self.warn(self.span(tok), "anonymous newloc: consider an explicit `as SITE` name for exhaustive exploration")
            coordinator = None
            if self.accept(","):
                coordinator = self.nested(_Ctx(f"{self.ctx.desc} (newloc coordinator)", True, self.ctx.def_name))
            self.expect(")")
            return Newloc(loc.text, name, coordinator)
        if kw in ("login", "logout"):
            self.expect("(")
            target = self.expr()
            self.expect(")")
            return (Login if kw == "login" else Logout)(target)
        if kw == "accept":
            return self.parse_accept(tok)
        if kw == "exec":
            name = self.take("ident", "a computation name")
            self.expect("(")
            return Exec(name.text, tuple(self.comma_list(")", self.expr)))
        raise AssertionError(kw)

    def parse_accept(self, tok: Token) -> Accept:
        if self.accept("*"):
            members = ["*"]
        else:
            self.expect("{")
            members = [t.text for t in self.comma_list("}", self.accept_member)]
        wildcard = "*" in members
        sites = tuple(m for m in members if m != "*")
        if wildcard and "open-accept" not in self.extensions:
            self.warn(self.span(tok), "wildcard accept ignored: extension 'open-accept' is not enabled")
            wildcard = False
        if not sites and not wildcard:
            self.error(self.span(tok), "accept needs at least one site")
        return Accept(tuple(sorted(set(sites))), wildcard)

    def accept_member(self):
        tok = self.accept("*")
        return tok if tok is not None else self.take("site", "a site or '*'")

    # -- assertions

    def parse_assert(self):
        start = self.expect("assert")
        mode = self.take("ident", "reachable, invariant or blocked_forever")
        if mode.text not in MODES:
            self.fail(f"unknown assertion mode {mode.text!r}", mode)
        pred = self.predicate()
        self.assertions.append(Assertion(mode.text, pred, self.span(start)))

    def predicate(self):
        left = self.pred_or()
        if self.accept("implies"):
            return Implies(left, self.predicate())
        return left

    def pred_or(self):
        items = [self.pred_and()]
        while self.accept("or"):
            items.append(self.pred_and())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def pred_and(self):
        items = [self.pred_not()]
        while self.accept("and"):
            items.append(self.pred_not())
        return items[0] if len(items) == 1 else And(tuple(items))

    def pred_not(self):
        if self.accept("not"):
            return Not(self.pred_not())
        return self.pred_atom()

    def site_sel(self):
        site = self.take("site", "a site")
        loc = None
        if self.accept("."):
            loc = self.take("ident", "a locality name").text
        return SiteSel(site.text, loc)

    def pred_fields(self):
        self.expect("(")
        return tuple(self.comma_list(")", self.pred_field))

    def pred_field(self):
        if self.accept("!"):
            return Formal(self.take("ident", "a variable name").text)
        return self.literal()

    def pred_atom(self):
        tok = self.peek()
        if tok is None:
            self.fail("expected a predicate at end of input")
        if self.accept("("):
            p = self.predicate()
            self.expect(")")
            return p
        if tok.kind != "ident":
            self.fail(f"expected a predicate, found {tok.text!r}")
        self.i += 1
        word = tok.text
        if word in ("true", "false"):
            return TruePred(word == "true")
        if word in STATE_PREDICATES:
            return StatePred(word)
        if word == "link":
            self.expect("(")
            a = self.site_sel()
            self.expect(",")
            b = self.site_sel()
            self.expect(")")
            return Link(a, b)
        if word == "ts":
            self.expect("(")
            sel = self.site_sel()
            self.expect(")")
            verb = self.take("ident", "'contains' or 'count'")
            if verb.text == "contains":
                return TupleAt(sel, self.pred_fields())
            if verb.text == "count":
                fields = self.pred_fields()
                op = self.peek()
                if op is None or op.text not in COMPARISONS:
                    self.fail("expected a comparison operator")
                self.i += 1
                return TupleCount(sel, fields, op.text, int(self.take("int", "an integer").text))
            self.fail(f"expected 'contains' or 'count', found {verb.text!r}", verb)
        if word == "action":
            self.expect("(")
            kind = self.peek()
            if kind is None or kind.kind != "ident":
                self.fail("expected an action kind")
            self.i += 1
            if kind.text not in ACTION_LABELS:
                self.fail(f"unknown action kind {kind.text!r}", kind)
            self.expect(",")
            site = self.site_sel()
            target = None
            if self.accept(","):
                target = self.site_sel()
            self.expect(")")
            return ActionEnabled(kind.text, site, target)
        self.fail(f"unknown predicate {word!r}", tok)

    # -- static checks

    def check(self):
        for ctx, kind, span in self.privileged:
            if not ctx.coord:
                self.error(span, f"privileged action '{kind}' in non-coordinator context: {ctx.desc}")
        unguarded: dict = {}
        for ctx, name, nargs, span, guarded in self.calls:
            d = self.defs.get(name)
            if d is None:
                self.error(span, f"call to undefined definition {name!r}")
                continue
            if len(d.params) != nargs:
                self.error(span, f"{name!r} expects {len(d.params)} argument(s), got {nargs}")
            if d.coord and not ctx.coord:
                self.error(span, f"coordinator definition {name!r} called from non-coordinator context: {ctx.desc}")
            if ctx.def_name is not None and not guarded:
                unguarded.setdefault(ctx.def_name, set()).add(name)
        for cycle in _cycles(unguarded):
            self.error(self.def_spans[cycle[0]], "unguarded recursion: " + " -> ".join(cycle + [cycle[0]]))
        for site, (links, link_spans, *_rest) in self.nodes.items():
            for other in links:
                if other not in self.nodes:
                    self.error(link_spans[other], f"node {site} links to undeclared node {other}")
                elif site not in self.nodes[other][0]:
                    self.error(link_spans[other], f"link {site} -> {other} is not declared symmetrically")
        for a in self.assertions:
            for sel in _sites_of(a.predicate):
                if sel.site not in self.nodes and sel.site not in self.externals:
                    self.error(a.span, f"assertion refers to unknown site {sel.site} (declare it `external`)")
        records: dict = {}
        for site, (*_head, ts) in self.nodes.items():
            for t in ts:
                if len(t) == 3 and isinstance(t[0], str) and isinstance(t[1], int) and isinstance(t[2], SiteRef):
                    records.setdefault(t[1], set()).add(t[0])
        for sid, descs in sorted(records.items()):
            if len(descs) > 1:
                self.warn(self.span(self.toks[0]), f"service id {sid} used for several services: {sorted(descs)}")

    def build(self) -> ParseResult:
        nodes = {}
        fresh = self.fresh
        for site, (links, _spans, env, procs, coords, ts) in self.nodes.items():
            nodes[site] = Node(site, links=links, env=env, procs=procs, coords=coords, ts=ts)
            for s in [site, *env.values()]:
                m = re.fullmatch(r"s#([0-9]+)", s)
                if m:
                    fresh = max(fresh, int(m.group(1)) + 1)
        state = NetState(nodes, DefTable(self.defs), fresh)
        return ParseResult(state, list(self.assertions), list(self.warnings), frozenset(self.externals))


ACTIONS = frozenset({"out", "in", "read", "eval", "bind", "newloc", "login", "accept", "logout", "exec"})
ACTION_LABELS = ACTIONS | {"fault"}


def _cycles(graph: dict) -> list:
    """One representative cycle per strongly connected loop of ``graph``."""
    cycles, done = [], set()
    for start in sorted(graph):
        stack = [(start, [start])]
        seen = set()
        while stack:
            node, path = stack.pop()
            for nxt in sorted(graph.get(node, ())):
                if nxt == start:
                    members = frozenset(path)
                    if members not in done:
                        done.add(members)
                        cycles.append(path)
                elif nxt not in seen and nxt in graph:
                    seen.add(nxt)
                    stack.append((nxt, path + [nxt]))
    return cycles


def parse_net(text: str, *, extensions=(), filename: str = "<string>") -> ParseResult:
    """Parse and statically check a net description.

    Raises ParseErrors carrying every diagnostic found in one pass.
    """
    extensions = frozenset(extensions)
    unknown = extensions - EXTENSIONS
    if unknown:
        raise ValueError(f"unknown extension(s): {', '.join(sorted(unknown))}")
    p = _Parser(text, filename, extensions)
    p.parse()
    p.check()
    if p.errors:
        raise ParseErrors(sorted(p.errors, key=lambda d: (d.span.line, d.span.column)))
    return p.build()


def parse_process(text: str) -> Term:
    """Parse a single process term (no static checks)."""
    p = _Parser(text, "<process>", EXTENSIONS)
    p.ctx = _Ctx("process", True)
    try:
        term = p.parse_proc()
        if p.peek() is not None:
            p.fail(f"unexpected {p.peek().text!r}")
    except _Syntax as e:
        raise ParseErrors([e.diag]) from None
    return term


# --------------------------------------------------------------------------
# rendering


def render_state(state: NetState) -> str:
    """Render a state as DSL text that parses back to an equal state."""
    return state.text


def render_net(state: NetState, assertions=(), externals=()) -> str:
    """Render a state together with assertions as a scenario file."""
    parts = [state.text]
    sites = sorted(set(externals) | {s.site for a in assertions for s in _sites_of(a.predicate)} - set(state.nodes))
    if sites:
        parts.append("external " + ", ".join(sites) + "\n")
    if assertions:
        parts.append("".join(f"assert {a}\n" for a in assertions))
    return "\n".join(parts)


def step_json(step: Step) -> dict:
    entry = {"site": step.site, "action": step.action}
    if step.partner is not None:
        entry["partner"] = step.partner
    return entry


def render_trace_json(trace: Trace, final: NetState) -> str:
    doc = {
        "seed": trace.seed,
        "steps": [step_json(s) for s in trace.steps],
        "final_state": render_state(final),
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def parse_trace_json(text: str) -> Trace:
    doc = json.loads(text)
    steps = [Step(s["site"], s["action"], s.get("partner")) for s in doc["steps"]]
    return Trace(doc.get("seed"), steps)
