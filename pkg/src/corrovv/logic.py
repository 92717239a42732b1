"""Spatial traffic-rule formulas over lane views.

Concrete syntax (``;`` is the horizontal chop)::

    free | re(ID) | aut(ID)=0|1 | sign(stop) | sign(give-way) | crossing
    len CMP NUMBER | len CMP size(ID) [+ NUMBER]
    !f | f & g | f | g | f ; g | (f) | name | name(ID, ...)

Precedence is ``!`` > ``&`` > ``|`` > ``;``; ``&`` and ``|`` associate to the
left, ``;`` to the right.  Named abbreviations such as ``sg(E)`` are expanded
at parse time from a definitions table.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from .traffic import TOL, Snapshot, TrafficError, View, crossings_on, is_free, signs_on

CMPS = ("<", "<=", "=", ">=", ">")


class FormulaSyntaxError(ValueError):
    def __init__(self, msg: str, text: str, pos: int):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{msg} at line {line}, column {col}")
        self.line = line
        self.column = col
        self.position = pos + 1


class UnresolvedAgentError(LookupError):
    pass


# --------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Free:
    pass


@dataclass(frozen=True)
class Re:
    agent: str


@dataclass(frozen=True)
class Aut:
    agent: str
    value: bool


@dataclass(frozen=True)
class SignAhead:
    kind: str


@dataclass(frozen=True)
class CrossingAhead:
    pass


@dataclass(frozen=True)
class SizeOf:
    agent: str
    margin: float = 0.0


@dataclass(frozen=True)
class Len:
    cmp: str
    value: Union[float, SizeOf]

    def __post_init__(self):
        if self.cmp not in CMPS:
            raise ValueError(f"unknown comparison {self.cmp!r}")
        if not isinstance(self.value, SizeOf):
            v = float(self.value)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"length literal must be finite and >= 0, got {self.value}")
            object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Chop:
    left: "Formula"
    right: "Formula"


Formula = Union[Free, Re, Aut, SignAhead, CrossingAhead, Len, Not, And, Or, Chop]


@dataclass(frozen=True)
class Definition:
    name: str
    params: tuple[str, ...]
    body: Formula


def substitute(f: Formula, mapping: Mapping[str, str]) -> Formula:
    """Rename agent references according to ``mapping``."""
    if isinstance(f, Re):
        return Re(mapping.get(f.agent, f.agent))
    if isinstance(f, Aut):
        return Aut(mapping.get(f.agent, f.agent), f.value)
    if isinstance(f, Len) and isinstance(f.value, SizeOf):
        return Len(f.cmp, SizeOf(mapping.get(f.value.agent, f.value.agent), f.value.margin))
    if isinstance(f, Not):
        return Not(substitute(f.arg, mapping))
    if isinstance(f, (And, Or, Chop)):
        return type(f)(substitute(f.left, mapping), substitute(f.right, mapping))
    return f


def agents_in(f: Formula) -> set[str]:
    if isinstance(f, (Re, Aut)):
        return {f.agent}
    if isinstance(f, Len) and isinstance(f.value, SizeOf):
        return {f.value.agent}
    if isinstance(f, Not):
        return agents_in(f.arg)
    if isinstance(f, (And, Or, Chop)):
        return agents_in(f.left) | agents_in(f.right)
    return set()


def depth(f: Formula) -> int:
    if isinstance(f, Not):
        return 1 + depth(f.arg)
    if isinstance(f, (And, Or, Chop)):
        return 1 + max(depth(f.left), depth(f.right))
    return 0


# ------------------------------------------------------------------ parser

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<op><=|>=|==|≤|≥|⌢|[<>=!&|;()+,*])
  | (?P<id>[A-Za-z_][A-Za-z0-9_\-]*)
    """,
    re.VERBOSE,
)

_CMP_ALIASES = {"==": "=", "≤": "<=", "≥": ">="}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    i = 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m:
            raise FormulaSyntaxError(f"unexpected character {text[i]!r}", text, i)
        kind = m.lastgroup
        if kind != "ws":
            val = m.group()
            if kind == "op":
                val = _CMP_ALIASES.get(val, val)
                if val == "⌢":
                    val = ";"
            toks.append((kind, val, i))
        i = m.end()
    toks.append(("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, definitions: Mapping[str, Definition]):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.defs = definitions
        self._expanding: list[str] = []

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, msg: str, tok=None):
        tok = tok or self.peek()
        raise FormulaSyntaxError(msg, self.text, tok[2])

    def expect(self, val: str):
        t = self.next()
        if t[1] != val or t[0] == "eof":
            found = "end of input" if t[0] == "eof" else repr(t[1])
            raise FormulaSyntaxError(f"expected {val!r}, found {found}", self.text, t[2])
        return t

    def parse(self) -> Formula:
        f = self.chop()
        t = self.peek()
        if t[0] != "eof":
            self.fail(f"unexpected {t[1]!r}")
        return f

    def chop(self) -> Formula:
        left = self.disj()
        if self.peek()[1] == ";":
            self.next()
            return Chop(left, self.chop())
        return left

    def disj(self) -> Formula:
        f = self.conj()
        while self.peek()[1] == "|":
            self.next()
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.unary()
        while self.peek()[1] == "&":
            self.next()
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        if self.peek()[1] == "!":
            self.next()
            return Not(self.unary())
        return self.atom()

    def ident(self) -> str:
        t = self.next()
        if t[0] != "id":
            found = "end of input" if t[0] == "eof" else repr(t[1])
            raise FormulaSyntaxError(f"expected identifier, found {found}", self.text, t[2])
        return t[1]

    def number(self) -> float:
        t = self.next()
        if t[0] != "num":
            found = "end of input" if t[0] == "eof" else repr(t[1])
            raise FormulaSyntaxError(f"expected number, found {found}", self.text, t[2])
        return float(t[1])

    def atom(self) -> Formula:
        t = self.peek()
        if t[1] == "(" and t[0] == "op":
            self.next()
            f = self.chop()
            self.expect(")")
            return f
        if t[0] != "id":
            found = "end of input" if t[0] == "eof" else repr(t[1])
            self.fail(f"expected formula, found {found}")
        name = self.next()[1]
        if name == "free":
            return Free()
        if name == "crossing":
            return CrossingAhead()
        if name == "re":
            self.expect("(")
            a = self.ident()
            self.expect(")")
            return Re(a)
        if name == "aut":
            self.expect("(")
            a = self.ident()
            self.expect(")")
            self.expect("=")
            tok = self.peek()
            v = self.number()
            if v not in (0.0, 1.0):
                self.fail("autonomy flag must be 0 or 1", tok)
            return Aut(a, bool(v))
        if name == "sign":
            self.expect("(")
            tok = self.peek()
            kind = self.ident()
            if kind not in ("stop", "give-way"):
                self.fail(f"unknown sign kind {kind!r}", tok)
            self.expect(")")
            return SignAhead(kind)
        if name == "len":
            return self.length()
        if name in self.defs:
            return self.expand(name, t)
        raise FormulaSyntaxError(f"unknown atom {name!r}", self.text, t[2])

    def length(self) -> Formula:
        t = self.next()
        if t[1] not in CMPS:
            raise FormulaSyntaxError(f"expected comparison after len, found {t[1]!r}", self.text, t[2])
        cmp = t[1]
        nt = self.peek()
        if nt[0] == "id" and nt[1] == "size":
            self.next()
            self.expect("(")
            a = self.ident()
            self.expect(")")
            margin = 0.0
            if self.peek()[1] == "+":
                self.next()
                margin = self.number()
            return Len(cmp, SizeOf(a, margin))
        return Len(cmp, self.number())

    def expand(self, name: str, tok) -> Formula:
        d = self.defs[name]
        args: list[str] = []
        if self.peek()[1] == "(":
            self.next()
            args.append(self.ident())
            while self.peek()[1] == ",":
                self.next()
                args.append(self.ident())
            self.expect(")")
        if len(args) != len(d.params):
            self.fail(f"{name} expects {len(d.params)} argument(s), got {len(args)}", tok)
        return substitute(d.body, dict(zip(d.params, args)))


def parse_formula(text: str, definitions: Optional[Mapping[str, Definition]] = None) -> Formula:
    """Parse concrete syntax into a formula, expanding named abbreviations."""
    if definitions is None:
        definitions = STANDARD_DEFINITIONS
    return _Parser(text, definitions).parse()


# ----------------------------------------------------------------- printer

_PREC = {Chop: 0, Or: 1, And: 2, Not: 3}


def _num(v: float) -> str:
    r = repr(float(v))
    return r[:-2] if r.endswith(".0") else r


def format_formula(f: Formula) -> str:
    """Inverse of :func:`parse_formula` (up to whitespace)."""
    return _fmt(f, 0)


def _fmt(f: Formula, ctx: int) -> str:
    if isinstance(f, Free):
        return "free"
    if isinstance(f, CrossingAhead):
        return "crossing"
    if isinstance(f, Re):
        return f"re({f.agent})"
    if isinstance(f, Aut):
        return f"aut({f.agent})={int(f.value)}"
    if isinstance(f, SignAhead):
        return f"sign({f.kind})"
    if isinstance(f, Len):
        if isinstance(f.value, SizeOf):
            rhs = f"size({f.value.agent})"
            if f.value.margin:
                rhs += f" + {_num(f.value.margin)}"
        else:
            rhs = _num(f.value)
        return f"len {f.cmp} {rhs}"
    p = _PREC[type(f)]
    if isinstance(f, Not):
        s = "!" + _fmt(f.arg, p)
    elif isinstance(f, Chop):
        s = f"{_fmt(f.left, p + 1)} ; {_fmt(f.right, p)}"
    else:
        op = " & " if isinstance(f, And) else " | "
        s = f"{_fmt(f.left, p)}{op}{_fmt(f.right, p + 1)}"
    return f"({s})" if p < ctx else s


# ------------------------------------------------------------- definitions

_DEF_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\(([^)]*)\))?\s*:=\s*(.+?)\s*$")


def parse_definitions(text: str, base: Optional[Mapping[str, Definition]] = None) -> dict[str, Definition]:
    """Read ``name := formula`` lines (``#`` starts a comment)."""
    defs: dict[str, Definition] = dict(base or {})
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _DEF_LINE.match(line)
        if not m:
            raise ValueError(f"line {lineno}: expected 'name := formula'")
        name, params, body = m.group(1), m.group(2), m.group(3)
        if name in ("free", "re", "aut", "sign", "crossing", "len", "size"):
            raise ValueError(f"line {lineno}: {name!r} is a reserved atom")
        plist = tuple(p.strip() for p in params.split(",")) if params and params.strip() else ()
        try:
            # Earlier definitions only, so expansion always terminates.
            f = parse_formula(body, defs)
        except FormulaSyntaxError as e:
            raise ValueError(f"line {lineno}: {e}") from None
        defs[name] = Definition(name, plist, f)
    return defs


def load_definitions(path, base: Optional[Mapping[str, Definition]] = None) -> dict[str, Definition]:
    return parse_definitions(Path(path).read_text(encoding="utf-8"), base)


def safe_gap(agent: str = "E", margin: float = 0.0) -> Formula:
    """``free & len >= size(agent)``, optionally with an extra margin."""
    return And(Free(), Len(">=", SizeOf(agent, margin)))


def standard_definitions(margin: float = 0.0) -> dict[str, Definition]:
    return {"sg": Definition("sg", ("E",), safe_gap("E", margin))}


STANDARD_DEFINITIONS = standard_definitions()


# --------------------------------------------------------------- evaluation


def _resolve_length(snapshot: Snapshot, v) -> float:
    if isinstance(v, SizeOf):
        if not snapshot.has_agent(v.agent):
            raise UnresolvedAgentError(f"unresolved agent {v.agent!r}")
        return snapshot.agent(v.agent).size + v.margin
    return v


def _compare(length: float, cmp: str, v: float) -> bool:
    if cmp == ">=":
        return length >= v - TOL
    if cmp == ">":
        return length > v + TOL
    if cmp == "<=":
        return length <= v + TOL
    if cmp == "<":
        return length < v - TOL
    return abs(length - v) <= TOL


def _lengths(f: Formula, snapshot: Snapshot) -> list[float]:
    if isinstance(f, Len):
        return [_resolve_length(snapshot, f.value)]
    if isinstance(f, Not):
        return _lengths(f.arg, snapshot)
    if isinstance(f, (And, Or, Chop)):
        return _lengths(f.left, snapshot) + _lengths(f.right, snapshot)
    return []


def static_points(snapshot: Snapshot, lane: str) -> list[float]:
    """Positions on ``lane`` where an atom's truth can change."""
    pts = []
    for r in snapshot.reservations:
        if r.lane == lane:
            pts.extend(r.interval)
    inter = snapshot.network.intersection_on(lane)
    if inter is not None:
        pts.extend(inter)
    pts.extend(s.pos for s in signs_on(snapshot, lane))
    for c in crossings_on(snapshot, lane):
        pts.extend(c.interval)
    return pts


def _dedup(points: Iterable[float]) -> list[float]:
    out: list[float] = []
    for p in sorted(points):
        if not out or p - out[-1] > TOL:
            out.append(p)
    return out


def candidate_chop_points(snapshot: Snapshot, view: View, formula: Optional[Formula] = None) -> list[float]:
    """Finite set of chop points that decides every split of ``view``.

    Atoms only change truth at occupancy, sign and crossing boundaries, or when
    a part's length crosses a length threshold.  Thresholds are accumulated as
    sums so nested chops are covered too.
    """
    lo, hi = view.extent
    span = hi - lo
    sums = {0.0}
    if formula is not None:
        for v in _lengths(formula, snapshot):
            sums |= {s + v for s in sums if s + v <= span + TOL}
    anchors_left = [lo] + [p for p in static_points(snapshot, view.lane) if lo - TOL <= p <= hi + TOL]
    anchors_right = [hi] + anchors_left[1:]
    pts = set(anchors_left) | {hi}
    for s in sums:
        pts.update(a + s for a in anchors_left)
        pts.update(a - s for a in anchors_right)
    return _dedup(min(max(p, lo), hi) for p in pts)


class _Evaluator:
    def __init__(self, snapshot: Snapshot, view: View, formula: Formula):
        self.snap = snapshot
        self.lane = view.lane
        self.points = candidate_chop_points(snapshot, view, formula)
        self.memo: dict = {}
        for a in agents_in(formula):
            if not snapshot.has_agent(a):
                raise UnresolvedAgentError(f"unresolved agent {a!r}")

    def split_points(self, lo: float, hi: float) -> list[float]:
        inside = [p for p in self.points if lo - TOL <= p <= hi + TOL]
        inside = _dedup([lo, hi] + inside)
        mids = [(a + b) / 2.0 for a, b in zip(inside, inside[1:])]
        return sorted(inside + mids)

    def sat(self, f: Formula, lo: float, hi: float) -> bool:
        key = (f, lo, hi)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        res = self._sat(f, lo, hi)
        self.memo[key] = res
        return res

    def _sat(self, f: Formula, lo: float, hi: float) -> bool:
        snap = self.snap
        if isinstance(f, Free):
            return is_free(snap, View(self.lane, (lo, hi)))
        if isinstance(f, Re):
            r = snap.reservation_of(f.agent)
            return (
                r.lane == self.lane
                and hi - lo > TOL
                and abs(lo - r.lo) <= TOL
                and abs(hi - r.hi) <= TOL
            )
        if isinstance(f, Aut):
            return snap.agent(f.agent).aut == f.value
        if isinstance(f, SignAhead):
            return any(lo - TOL <= s.pos <= hi + TOL for s in signs_on(snap, self.lane, f.kind))
        if isinstance(f, CrossingAhead):
            return any(c.interval[0] <= hi + TOL and c.interval[1] >= lo - TOL for c in crossings_on(snap, self.lane))
        if isinstance(f, Len):
            return _compare(hi - lo, f.cmp, _resolve_length(snap, f.value))
        if isinstance(f, Not):
            return not self.sat(f.arg, lo, hi)
        if isinstance(f, And):
            return self.sat(f.left, lo, hi) and self.sat(f.right, lo, hi)
        if isinstance(f, Or):
            return self.sat(f.left, lo, hi) or self.sat(f.right, lo, hi)
        if isinstance(f, Chop):
            return any(self.sat(f.left, lo, m) and self.sat(f.right, m, hi) for m in self.split_points(lo, hi))
        raise TypeError(f"not a formula: {f!r}")


def evaluate(snapshot: Snapshot, view: View, formula: Union[Formula, str]) -> bool:
    """Does ``formula`` hold on ``view`` of ``snapshot``?"""
    if isinstance(formula, str):
        formula = parse_formula(formula)
    net = snapshot.network
    if not net.has_lane(view.lane):
        raise TrafficError(f"view outside network: unknown lane {view.lane!r}")
    lo, hi = view.extent
    if lo > hi + TOL or lo < -TOL or hi > net.lane_length + TOL:
        raise TrafficError(f"view outside network: [{lo}, {hi}]")
    return _Evaluator(snapshot, view, formula).sat(formula, lo, hi)


__all__ = [
    "And",
    "Aut",
    "Chop",
    "CrossingAhead",
    "Definition",
    "Formula",
    "FormulaSyntaxError",
    "Free",
    "Len",
    "Not",
    "Or",
    "Re",
    "STANDARD_DEFINITIONS",
    "SignAhead",
    "SizeOf",
    "UnresolvedAgentError",
    "agents_in",
    "candidate_chop_points",
    "depth",
    "evaluate",
    "format_formula",
    "load_definitions",
    "parse_definitions",
    "parse_formula",
    "safe_gap",
    "standard_definitions",
    "static_points",
    "substitute",
]
