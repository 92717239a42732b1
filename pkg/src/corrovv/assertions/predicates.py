"""Trace predicate language: syntax tree, parser and static typing.

Predicates are boolean expressions over per-step trace fields, for example
``speed(ego) <= 0.01 & accel(ego) > 0`` or ``once(usl("sign(stop)", 1.0))``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union


class PredicateError(ValueError):
    """Syntax, typing or schema error in a predicate."""

    def __init__(self, message: str, position: Optional[int] = None):
        self.position = position
        super().__init__(message if position is None else f"{message} (at character {position + 1})")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Str:
    value: str


@dataclass(frozen=True)
class Ident:
    name: str


@dataclass(frozen=True)
class Star:
    pass


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


@dataclass(frozen=True)
class Cmp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Arith:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Not:
    arg: object


@dataclass(frozen=True)
class And:
    left: object
    right: object


@dataclass(frozen=True)
class Or:
    left: object
    right: object


Node = Union[Num, Str, Ident, Star, Call, Cmp, Arith, Neg, Not, And, Or]

BOOL, NUM, STR = "bool", "num", "str"

# name -> (argument kinds, result type).  Argument kinds: agent, target,
# other (agent or *), bool, any, num, str, obsname.
FUNCTIONS: dict[str, tuple[tuple[str, ...], str]] = {
    "speed": (("agent",), NUM),
    "pos": (("agent",), NUM),
    "accel": (("agent",), NUM),
    "size": (("agent",), NUM),
    "v_max": (("agent",), NUM),
    "a_max": (("agent",), NUM),
    "lane": (("agent",), STR),
    "turn_signal": (("agent",), STR),
    "aut": (("agent",), BOOL),
    "present": (("agent",), BOOL),
    "time": ((), NUM),
    "dwell": ((), NUM),
    "location": ((), STR),
    "action": ((), STR),
    "obs": (("obsname",), BOOL),
    "in_intersection": (("agent",), BOOL),
    "enters_intersection": (("agent",), BOOL),
    "distance_to": (("agent", "target"), NUM),
    "min_gap": (("agent", "other"), NUM),
    "usl": (("str", "num?", "str?"), BOOL),
    "prev": (("any",), None),
    "once": (("bool",), BOOL),
}

TARGETS = ("sign", "stop_sign", "give_way_sign", "crossing", "intersection")
CONSTANTS = {"inf": NUM, "true": BOOL, "false": BOOL, "v_max": NUM, "a_max": NUM, "b_max": NUM}
CMP_OPS = ("<", "<=", "==", "!=", ">=", ">")

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<num>\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)
      | (?P<str>"(?:[^"\\]|\\.)*")
      | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<op><=|>=|==|!=|[<>=!&|(),*+\-])
    )""",
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip() == "":
                break
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise PredicateError(f"unexpected character {text[start]!r}", start)
        kind = m.lastgroup
        start = m.start(kind)
        val = m.group(kind)
        if kind == "op" and val == "=":
            val = "=="
        out.append((kind, val, start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, val: str):
        t = self.take()
        if t[1] != val or t[0] == "str":
            raise PredicateError(f"expected {val!r}, found {t[1] or 'end of input'!r}", t[2])
        return t

    def parse(self) -> Node:
        e = self.disj()
        t = self.peek()
        if t[0] != "end":
            raise PredicateError(f"unexpected {t[1]!r}", t[2])
        return e

    def disj(self):
        e = self.conj()
        while self.peek()[:2] == ("op", "|"):
            self.take()
            e = Or(e, self.conj())
        return e

    def conj(self):
        e = self.unary()
        while self.peek()[:2] == ("op", "&"):
            self.take()
            e = And(e, self.unary())
        return e

    def unary(self):
        if self.peek()[:2] == ("op", "!"):
            self.take()
            return Not(self.unary())
        return self.comparison()

    def comparison(self):
        left = self.sum()
        t = self.peek()
        if t[0] == "op" and t[1] in CMP_OPS:
            self.take()
            right = self.sum()
            nt = self.peek()
            if nt[0] == "op" and nt[1] in CMP_OPS:
                raise PredicateError("chained comparisons need parentheses", nt[2])
            return Cmp(t[1], left, right)
        return left

    def sum(self):
        e = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            e = Arith(op, e, self.term())
        return e

    def term(self):
        t = self.take()
        kind, val, pos = t
        if kind == "num":
            return Num(float(val))
        if kind == "str":
            return Str(bytes(val[1:-1], "utf-8").decode("unicode_escape"))
        if kind == "op" and val == "-":
            return Neg(self.term())
        if kind == "op" and val == "(":
            e = self.disj()
            self.expect(")")
            return e
        if kind == "op" and val == "*":
            return Star()
        if kind == "id":
            if self.peek()[:2] == ("op", "("):
                self.take()
                args = []
                if self.peek()[:2] != ("op", ")"):
                    args.append(self.disj())
                    while self.peek()[:2] == ("op", ","):
                        self.take()
                        args.append(self.disj())
                self.expect(")")
                return Call(val, tuple(args))
            return Ident(val)
        raise PredicateError(f"unexpected {val or 'end of input'!r}", pos)


def parse_predicate(text: str) -> Node:
    """Parse and type-check a predicate; the result must be boolean."""
    if not isinstance(text, str) or not text.strip():
        raise PredicateError("empty predicate")
    node = _Parser(text).parse()
    t = type_of(node)
    if t != BOOL:
        raise PredicateError(f"predicate must be boolean, got a {t} expression")
    return node


def _agent_arg(a) -> bool:
    return isinstance(a, (Ident, Str))


def type_of(node: Node) -> str:
    """Static type; raises PredicateError on ill-typed or unknown fields."""
    if isinstance(node, Num):
        return NUM
    if isinstance(node, Str):
        return STR
    if isinstance(node, Star):
        raise PredicateError("'*' is only allowed as the second argument of min_gap")
    if isinstance(node, Ident):
        # Bare identifiers are constants or observation names.
        return CONSTANTS.get(node.name, BOOL)
    if isinstance(node, Neg):
        if type_of(node.arg) != NUM:
            raise PredicateError("unary minus needs a number")
        return NUM
    if isinstance(node, Arith):
        if type_of(node.left) != NUM or type_of(node.right) != NUM:
            raise PredicateError(f"'{node.op}' needs numbers on both sides")
        return NUM
    if isinstance(node, Not):
        if type_of(node.arg) != BOOL:
            raise PredicateError("'!' needs a boolean")
        return BOOL
    if isinstance(node, (And, Or)):
        if type_of(node.left) != BOOL or type_of(node.right) != BOOL:
            raise PredicateError("'&' and '|' need booleans")
        return BOOL
    if isinstance(node, Cmp):
        lt, rt = type_of(node.left), type_of(node.right)
        if lt != rt:
            raise PredicateError(f"cannot compare {lt} with {rt}")
        if lt != NUM and node.op not in ("==", "!="):
            raise PredicateError(f"'{node.op}' needs numbers; {lt} values support only == and !=")
        return BOOL
    if isinstance(node, Call):
        if node.name not in FUNCTIONS:
            raise PredicateError(f"unknown field {node.name!r}")
        kinds, result = FUNCTIONS[node.name]
        required = [k for k in kinds if not k.endswith("?")]
        if not len(required) <= len(node.args) <= len(kinds):
            raise PredicateError(f"{node.name}() takes {len(kinds)} argument(s), got {len(node.args)}")
        types = []
        for kind, arg in zip(kinds, node.args):
            kind = kind.rstrip("?")
            if kind == "agent" and not _agent_arg(arg):
                raise PredicateError(f"{node.name}(): expected an agent name")
            if kind == "other" and not (_agent_arg(arg) or isinstance(arg, Star)):
                raise PredicateError(f"{node.name}(): expected an agent name or *")
            if kind == "target" and not _agent_arg(arg):
                raise PredicateError(f"{node.name}(): expected one of {TARGETS} or an agent name")
            if kind == "obsname" and not _agent_arg(arg):
                raise PredicateError("obs(): expected an observation name")
            if kind in ("bool", "num", "str", "any"):
                t = type_of(arg)
                if kind != "any" and t != kind:
                    raise PredicateError(f"{node.name}(): expected a {kind} argument, got {t}")
                types.append(t)
        if node.name == "usl":
            if not isinstance(node.args[0], Str) or (len(node.args) > 1 and not isinstance(node.args[1], Num)) or (
                len(node.args) > 2 and not isinstance(node.args[2], Str)
            ):
                raise PredicateError('usl() takes literal arguments: usl("formula"[, horizon[, "ahead"|"rear"]])')
            if len(node.args) == 3 and node.args[2].value not in ("ahead", "rear"):
                raise PredicateError('usl(): view must be "ahead" or "rear"')
            _check_usl(node.args[0].value)
        return types[0] if result is None else result
    raise TypeError(node)


def _check_usl(text: str) -> None:
    from ..logic import FormulaSyntaxError, parse_formula

    try:
        parse_formula(text)
    except FormulaSyntaxError as exc:
        raise PredicateError(f"usl(): {exc}") from None


def name_of(arg) -> str:
    return arg.value if isinstance(arg, Str) else arg.name


def format_predicate(node: Node) -> str:
    return _fmt(node, 0)


_PREC = {Or: 1, And: 2, Not: 3, Cmp: 4, Arith: 5}


def _fmt(n: Node, ctx: int) -> str:
    if isinstance(n, Num):
        v = n.value
        s = str(int(v)) if v == int(v) and abs(v) < 1e15 else repr(v)
        return s
    if isinstance(n, Str):
        return '"' + n.value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(n, Ident):
        return n.name
    if isinstance(n, Star):
        return "*"
    if isinstance(n, Call):
        return f"{n.name}(" + ", ".join(_fmt(a, 0) for a in n.args) + ")"
    if isinstance(n, Neg):
        return "-" + _fmt(n.arg, 6)
    if isinstance(n, Not):
        s = "!" + _fmt(n.arg, 3)
    elif isinstance(n, Cmp):
        s = f"{_fmt(n.left, 5)} {n.op} {_fmt(n.right, 5)}"
    elif isinstance(n, Arith):
        s = f"{_fmt(n.left, 5)} {n.op} {_fmt(n.right, 6)}"
    elif isinstance(n, And):
        s = f"{_fmt(n.left, 2)} & {_fmt(n.right, 2)}"
    elif isinstance(n, Or):
        s = f"{_fmt(n.left, 1)} | {_fmt(n.right, 1)}"
    else:
        raise TypeError(n)
    return f"({s})" if _PREC[type(n)] < ctx else s


def leaves(node: Node) -> list[Node]:
    """Field reads (calls and bare identifiers) in first-occurrence order."""
    out: list[Node] = []

    def walk(n):
        if isinstance(n, (Call, Ident)):
            if n not in out:
                out.append(n)
            if isinstance(n, Call) and n.name in ("prev", "once"):
                for a in n.args:
                    walk(a)
            return
        for attr in ("arg", "left", "right"):
            if hasattr(n, attr):
                walk(getattr(n, attr))

    walk(node)
    return out


def identifiers(node: Node) -> tuple[set[str], set[str]]:
    """(agent names, observation names) referenced by ``node``."""
    agents: set[str] = set()
    obs: set[str] = set()

    def walk(n):
        if isinstance(n, Ident):
            if n.name not in CONSTANTS:
                obs.add(n.name)
        elif isinstance(n, Call):
            kinds = FUNCTIONS.get(n.name, ((), None))[0]
            for kind, a in zip(kinds, n.args):
                kind = kind.rstrip("?")
                if kind in ("agent", "other") and _agent_arg(a):
                    agents.add(name_of(a))
                elif kind == "target" and _agent_arg(a) and name_of(a) not in TARGETS:
                    agents.add(name_of(a))
                elif kind == "obsname":
                    obs.add(name_of(a))
                elif kind in ("bool", "any", "num"):
                    walk(a)
        else:
            for attr in ("arg", "left", "right"):
                if hasattr(n, attr):
                    walk(getattr(n, attr))

    walk(node)
    return agents, obs
