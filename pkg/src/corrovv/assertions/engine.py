"""Assertion checking over stored traces.

A trace is loaded once into a column store (one numpy vector per field) and
predicates are evaluated column-at-a-time.  Spatial sub-formulas (``usl``)
rebuild the step's snapshot and call the spatial-logic evaluator.
"""
from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .. import logic
from ..simulator import EGO_SYMBOL, Trace
from ..traffic import TOL, view_ahead, view_from_rear
from .predicates import (
    And,
    Arith,
    Call,
    Cmp,
    Ident,
    Neg,
    Node,
    Not,
    Num,
    Or,
    PredicateError,
    Star,
    Str,
    TARGETS,
    format_predicate,
    leaves,
    name_of,
    parse_predicate,
)

KINDS = ("invariant", "execution", "pre", "post")
KIND_LABELS = {"invariant": "Invariant", "execution": "Execution", "pre": "PreCondition", "post": "PostCondition"}
_KIND_ALIASES = {"precondition": "pre", "postcondition": "post"}
FLAVORS = ("temporal", "physical")
VERDICTS = ("pass", "fail", "vacuous")
TIME_TOL = 1e-9


class AssertionSyntaxError(ValueError):
    """Malformed assertion file; carries the stanza number and line."""

    def __init__(self, message: str, stanza: int, line: int):
        super().__init__(f"stanza {stanza} (line {line}): {message}")
        self.stanza = stanza
        self.line = line


class EvaluationError(RuntimeError):
    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


# --------------------------------------------------------------- assertions


@dataclass(frozen=True)
class Assertion:
    name: str
    kind: str
    condition: Node
    trigger: Optional[Node] = None
    flavor: Optional[str] = None
    window: Optional[float] = None
    edges: str = "rising"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"assertion {self.name}: unknown kind {self.kind!r}")
        if self.kind == "invariant":
            if self.trigger is not None or self.window is not None:
                raise ValueError(f"assertion {self.name}: an invariant takes no trigger or window")
        elif self.trigger is None:
            raise ValueError(f"assertion {self.name}: kind={self.kind} needs a trigger")
        if self.kind in ("pre", "post"):
            if self.window is None:
                raise ValueError(f"assertion {self.name}: kind={self.kind} needs a window")
            if not self.window > 0:
                raise ValueError(f"assertion {self.name}: window must be > 0")
            if self.flavor not in FLAVORS:
                object.__setattr__(self, "flavor", "temporal")
        elif self.flavor is not None:
            raise ValueError(f"assertion {self.name}: flavor applies to pre/post only")
        if self.edges not in ("rising", "all"):
            raise ValueError(f"assertion {self.name}: edges must be 'rising' or 'all'")

    @classmethod
    def make(cls, name: str, kind: str, condition: str, trigger: Optional[str] = None, **kw) -> "Assertion":
        return cls(name, kind, parse_predicate(condition), parse_predicate(trigger) if trigger else None, **kw)

    @property
    def label(self) -> str:
        return KIND_LABELS[self.kind]

    def format(self) -> str:
        head = [f"assert {self.name}", f"kind={self.kind}"]
        if self.flavor:
            head.append(f"flavor={self.flavor}")
        if self.window is not None:
            head.append(f"window={_fmt_num(self.window)}")
        if self.edges != "rising":
            head.append(f"edges={self.edges}")
        lines = [" ".join(head)]
        if self.trigger is not None:
            lines.append(f"  trigger: {format_predicate(self.trigger)}")
        lines.append(f"  condition: {format_predicate(self.condition)}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.label}
        if self.flavor:
            d["flavor"] = self.flavor
        if self.window is not None:
            d["window"] = self.window
        if self.trigger is not None:
            d["trigger"] = format_predicate(self.trigger)
        d["condition"] = format_predicate(self.condition)
        if self.edges != "rising":
            d["edges"] = self.edges
        return d


def _fmt_num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


_KEYWORD = re.compile(r"\b(trigger|condition)\s*:")


def _split_sections(text: str) -> list[tuple[str, int, int]]:
    """Positions of ``trigger:`` / ``condition:`` outside string literals."""
    out = []
    in_str = False
    i = 0
    while i < len(text):
        c = text[i]
        if in_str:
            if c == "\\":
                i += 2
                continue
            if c == '"':
                in_str = False
        elif c == '"':
            in_str = True
        else:
            m = _KEYWORD.match(text, i)
            if m and (i == 0 or not (text[i - 1].isalnum() or text[i - 1] == "_")):
                out.append((m.group(1), m.start(), m.end()))
                i = m.end()
                continue
        i += 1
    return out


def parse_assertions(text: str) -> list[Assertion]:
    """Parse ``assert <name> kind=... [flavor=...] [window=...] [trigger: p] condition: p`` stanzas."""
    stanzas: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0] if not _in_string_comment(raw) else raw
        if not line.strip():
            continue
        if re.match(r"\s*assert\b", line):
            stanzas.append((lineno, [line]))
        elif stanzas:
            stanzas[-1][1].append(line)
        else:
            raise AssertionSyntaxError("text before the first 'assert'", 0, lineno)
    out: list[Assertion] = []
    names = set()
    for idx, (lineno, lines) in enumerate(stanzas, start=1):
        body = "\n".join(lines)
        a = _parse_stanza(body, idx, lineno)
        if a.name in names:
            raise AssertionSyntaxError(f"duplicate assertion name {a.name!r}", idx, lineno)
        names.add(a.name)
        out.append(a)
    return out


def _in_string_comment(line: str) -> bool:
    # A '#' inside a quoted usl formula is not a comment.
    hash_at = line.find("#")
    return hash_at >= 0 and line[:hash_at].count('"') % 2 == 1


def _parse_stanza(body: str, stanza: int, first_line: int) -> Assertion:
    secs = _split_sections(body)

    def line_of(pos: int) -> int:
        return first_line + body.count("\n", 0, pos)

    head_end = secs[0][1] if secs else len(body)
    head = body[:head_end].split()
    if len(head) < 2:
        raise AssertionSyntaxError("missing assertion name", stanza, first_line)
    name = head[1]
    if not re.fullmatch(r"[A-Za-z_][\w.-]*", name):
        raise AssertionSyntaxError(f"invalid assertion name {name!r}", stanza, first_line)
    opts = {}
    for tok in head[2:]:
        if "=" not in tok:
            raise AssertionSyntaxError(f"expected key=value, found {tok!r}", stanza, first_line)
        k, v = tok.split("=", 1)
        if k not in ("kind", "flavor", "window", "edges"):
            raise AssertionSyntaxError(f"unknown option {k!r}", stanza, first_line)
        if k in opts:
            raise AssertionSyntaxError(f"option {k!r} given twice", stanza, first_line)
        opts[k] = v
    if "kind" not in opts:
        raise AssertionSyntaxError("missing kind=", stanza, first_line)
    kind = _KIND_ALIASES.get(opts["kind"].lower(), opts["kind"].lower())
    if kind not in KINDS:
        raise AssertionSyntaxError(f"unknown kind {opts['kind']!r} (expected one of {KINDS})", stanza, first_line)
    flavor = opts.get("flavor")
    if flavor is not None and flavor not in FLAVORS:
        raise AssertionSyntaxError(f"unknown flavor {flavor!r}", stanza, first_line)
    window = None
    if "window" in opts:
        m = re.fullmatch(r"([0-9]*\.?[0-9]+(?:[eE][-+]?\d+)?)(s|m)?", opts["window"])
        if not m:
            raise AssertionSyntaxError(f"bad window {opts['window']!r}", stanza, first_line)
        window = float(m.group(1))
        unit = m.group(2)
        implied = {"s": "temporal", "m": "physical"}.get(unit)
        if implied and flavor and implied != flavor:
            raise AssertionSyntaxError(f"window unit {unit!r} contradicts flavor={flavor}", stanza, first_line)
        flavor = flavor or implied
    if kind in ("pre", "post") and window is None:
        raise AssertionSyntaxError(f"kind={kind} requires window=", stanza, first_line)
    if kind in ("pre", "post") and not window > 0:
        raise AssertionSyntaxError("window must be > 0", stanza, first_line)
    if kind in ("invariant", "execution") and (window is not None or flavor is not None):
        raise AssertionSyntaxError(f"kind={kind} takes no window or flavor", stanza, first_line)
    parts = {}
    for k, (sec, start, end) in enumerate(secs):
        stop = secs[k + 1][1] if k + 1 < len(secs) else len(body)
        if sec in parts:
            raise AssertionSyntaxError(f"{sec}: given twice", stanza, line_of(start))
        text = body[end:stop].strip()
        try:
            parts[sec] = parse_predicate(text)
        except PredicateError as exc:
            raise AssertionSyntaxError(f"{sec}: {exc}", stanza, line_of(start)) from None
    if "condition" not in parts:
        raise AssertionSyntaxError("missing condition:", stanza, first_line)
    if kind == "invariant" and "trigger" in parts:
        raise AssertionSyntaxError("an invariant takes no trigger", stanza, first_line)
    if kind != "invariant" and "trigger" not in parts:
        raise AssertionSyntaxError(f"kind={kind} requires trigger:", stanza, first_line)
    edges = opts.get("edges", "rising")
    if edges not in ("rising", "all"):
        raise AssertionSyntaxError("edges must be 'rising' or 'all'", stanza, first_line)
    return Assertion(name, kind, parts["condition"], parts.get("trigger"), flavor if kind in ("pre", "post") else None, window, edges)


def load_assertions(path) -> list[Assertion]:
    return parse_assertions(Path(path).read_text(encoding="utf-8"))


def format_assertions(assertions: Iterable[Assertion]) -> str:
    return "\n\n".join(a.format() for a in assertions) + "\n"


# -------------------------------------------------------------- column store


class TraceTable:
    """Immutable columnar view of a trace."""

    def __init__(self, trace: Trace):
        self.trace = trace
        h = trace.header
        steps = trace.steps
        n = len(steps)
        if n == 0:
            raise EvaluationError("trace has no steps")
        self.n = n
        self.ego = h["ego"]
        self.dt = float(h["dt"])
        self.b_max = float(h["b_max"])
        self.static = h["agents"]
        self.network = trace.network()
        self.time = np.array([s["time"] for s in steps], dtype=float)
        self.location = np.array([s["location"] for s in steps], dtype=object)
        self.action = np.array([s.get("action", "") for s in steps], dtype=object)
        names = list(h.get("observations", {}))
        for s in steps:
            for o in s["observations"]:
                if o not in names:
                    names.append(o)
        self.observations = {o: np.array([bool(s["observations"].get(o, False)) for s in steps]) for o in names}
        self.agent_ids = list(self.static)
        self.cols: dict[str, dict[str, np.ndarray]] = {}
        for aid in self.agent_ids:
            self.cols[aid] = {
                "present": np.zeros(n, dtype=bool),
                "lane": np.full(n, "", dtype=object),
                "pos": np.full(n, np.nan),
                "speed": np.full(n, np.nan),
                "accel": np.full(n, np.nan),
                "turn_signal": np.full(n, "", dtype=object),
                "aut": np.zeros(n, dtype=bool),
            }
        for k, s in enumerate(steps):
            for a in s["agents"]:
                c = self.cols.get(a["id"])
                if c is None:
                    raise EvaluationError(f"agent {a['id']!r} missing from the trace header", k)
                c["present"][k] = True
                c["lane"][k] = a["lane"]
                c["pos"][k] = a["pos"]
                c["speed"][k] = a["speed"]
                c["accel"][k] = a["accel"]
                c["turn_signal"][k] = a["turn_signal"]
                c["aut"][k] = bool(a["aut"])
        self._snapshots: dict[int, object] = {}

    def agent(self, name: str) -> str:
        aid = self.ego if name == "ego" else name
        if aid not in self.cols:
            raise PredicateError(f"unknown agent {name!r}; trace agents are {self.agent_ids}")
        return aid

    def snapshot(self, k: int):
        s = self._snapshots.get(k)
        if s is None:
            s = self.trace.snapshot(k, self.network)
            self._snapshots[k] = s
        return s


# ---------------------------------------------------------------- evaluation


class ColumnEvaluator:
    """Evaluates predicate nodes to full-length columns, memoized per node."""

    def __init__(self, table: TraceTable):
        self.t = table
        self.memo: dict = {}

    def __call__(self, node: Node) -> np.ndarray:
        v = self.memo.get(node)
        if v is None:
            v = self._eval(node)
            self.memo[node] = v
        return v

    def _full(self, value, dtype=None) -> np.ndarray:
        return np.full(self.t.n, value, dtype=dtype)

    def _eval(self, n: Node) -> np.ndarray:
        if isinstance(n, Num):
            return self._full(n.value, float)
        if isinstance(n, Str):
            return self._full(n.value, object)
        if isinstance(n, Ident):
            return self._ident(n.name)
        if isinstance(n, Neg):
            return -self(n.arg)
        if isinstance(n, Arith):
            a, b = self(n.left), self(n.right)
            with np.errstate(invalid="ignore"):
                return a + b if n.op == "+" else a - b
        if isinstance(n, Not):
            return ~self(n.arg)
        if isinstance(n, And):
            return self(n.left) & self(n.right)
        if isinstance(n, Or):
            return self(n.left) | self(n.right)
        if isinstance(n, Cmp):
            a, b = self(n.left), self(n.right)
            with np.errstate(invalid="ignore"):
                r = {
                    "<": lambda: a < b,
                    "<=": lambda: a <= b,
                    "==": lambda: a == b,
                    "!=": lambda: a != b,
                    ">=": lambda: a >= b,
                    ">": lambda: a > b,
                }[n.op]()
            return np.asarray(r, dtype=bool)
        if isinstance(n, Call):
            return self._call(n)
        if isinstance(n, Star):
            raise PredicateError("'*' outside min_gap")
        raise TypeError(n)

    def _ident(self, name: str) -> np.ndarray:
        t = self.t
        if name == "true":
            return self._full(True, bool)
        if name == "false":
            return self._full(False, bool)
        if name == "inf":
            return self._full(math.inf, float)
        if name == "b_max":
            return self._full(t.b_max, float)
        if name in ("v_max", "a_max"):
            return self._full(float(t.static[t.ego][name]), float)
        if name in t.observations:
            return t.observations[name]
        raise PredicateError(f"unknown field {name!r}: not an observation of this trace ({sorted(t.observations)})")

    def _call(self, n: Call) -> np.ndarray:
        t = self.t
        f = n.name
        if f in ("speed", "pos", "accel", "lane", "turn_signal", "aut", "present"):
            return t.cols[t.agent(name_of(n.args[0]))][f]
        if f in ("size", "v_max", "a_max"):
            aid = t.agent(name_of(n.args[0]))
            v = float(t.static[aid][f])
            return np.where(t.cols[aid]["present"], v, np.nan)
        if f == "time":
            return t.time
        if f == "location":
            return t.location
        if f == "action":
            return t.action
        if f == "dwell":
            change = np.ones(t.n, dtype=bool)
            change[1:] = t.location[1:] != t.location[:-1]
            entry = np.maximum.accumulate(np.where(change, t.time, -np.inf))
            return t.time - entry
        if f == "obs":
            o = name_of(n.args[0])
            if o not in t.observations:
                raise PredicateError(f"unknown observation {o!r}; trace records {sorted(t.observations)}")
            return t.observations[o]
        if f == "in_intersection":
            return self._in_intersection(t.agent(name_of(n.args[0])))
        if f == "enters_intersection":
            inside = self._in_intersection(t.agent(name_of(n.args[0])))
            before = np.zeros(t.n, dtype=bool)
            before[1:] = inside[:-1]
            return inside & ~before
        if f == "distance_to":
            aid = t.agent(name_of(n.args[0]))
            target = name_of(n.args[1])
            if target in TARGETS:
                return self._distance_static(aid, target)
            return self._gap(aid, t.agent(target))
        if f == "min_gap":
            aid = t.agent(name_of(n.args[0]))
            if isinstance(n.args[1], Star):
                out = np.where(t.cols[aid]["present"], np.inf, np.nan)
                for other in t.agent_ids:
                    if other != aid:
                        out = np.minimum(out, self._gap(aid, other))
                return out
            return self._gap(aid, t.agent(name_of(n.args[1])))
        if f == "usl":
            return self._usl(n)
        if f == "prev":
            a = self(n.args[0])
            out = np.empty_like(a)
            out[1:] = a[:-1]
            out[0] = {np.dtype(bool): False, np.dtype(float): np.nan}.get(a.dtype, "")
            return out
        if f == "once":
            return np.logical_or.accumulate(self(n.args[0]))
        raise PredicateError(f"unknown field {f!r}")

    def _in_intersection(self, aid: str) -> np.ndarray:
        t = self.t
        c = t.cols[aid]
        inter = t.network.intersection or {}
        lo = np.array([inter.get(l, (np.nan, np.nan))[0] for l in c["lane"]], dtype=float)
        hi = np.array([inter.get(l, (np.nan, np.nan))[1] for l in c["lane"]], dtype=float)
        size = float(t.static[aid]["size"])
        with np.errstate(invalid="ignore"):
            overlap = np.minimum(c["pos"], hi) - np.maximum(c["pos"] - size, lo)
            return c["present"] & (overlap > TOL)

    def _distance_static(self, aid: str, target: str) -> np.ndarray:
        t = self.t
        c = t.cols[aid]
        pos = c["pos"]
        out = np.where(c["present"], np.inf, np.nan)
        net = t.network
        for lane in net.lanes:
            on = c["lane"] == lane
            if target in ("sign", "stop_sign", "give_way_sign"):
                kinds = {"sign": ("stop", "give-way"), "stop_sign": ("stop",), "give_way_sign": ("give-way",)}[target]
                for s in net.signs:
                    if s.lane == lane and s.kind in kinds:
                        with np.errstate(invalid="ignore"):
                            d = np.where(on & (s.pos >= pos - TOL), np.maximum(s.pos - pos, 0.0), np.inf)
                        out = np.minimum(out, d)
            else:
                ivs = [c2.interval for c2 in net.crossings if c2.lane == lane] if target == "crossing" else (
                    [net.intersection_on(lane)] if net.intersection_on(lane) else []
                )
                for lo, hi in ivs:
                    with np.errstate(invalid="ignore"):
                        d = np.where(on & (hi >= pos - TOL), np.maximum(lo - pos, 0.0), np.inf)
                    out = np.minimum(out, d)
        return out

    def _gap(self, aid: str, other: str) -> np.ndarray:
        """Front of ``aid`` to the rear of ``other`` when ``other`` is level or ahead on the same lane."""
        t = self.t
        a, b = t.cols[aid], t.cols[other]
        if aid == other:
            return np.where(a["present"], np.inf, np.nan)
        size = float(t.static[other]["size"])
        with np.errstate(invalid="ignore"):
            ahead = b["present"] & (a["lane"] == b["lane"]) & (b["pos"] >= a["pos"])
            d = np.where(ahead, b["pos"] - size - a["pos"], np.inf)
        return np.where(a["present"], d, np.nan)

    def _usl(self, n: Call) -> np.ndarray:
        t = self.t
        text = n.args[0].value
        horizon = float(n.args[1].value) if len(n.args) > 1 else 4.5
        where = n.args[2].value if len(n.args) > 2 else "ahead"
        f = logic.parse_formula(text)
        if t.ego != EGO_SYMBOL:
            f = logic.substitute(f, {EGO_SYMBOL: t.ego})
        out = np.zeros(t.n, dtype=bool)
        present = t.cols[t.ego]["present"]
        for k in range(t.n):
            if not present[k]:
                continue
            snap = t.snapshot(k)
            view = view_ahead(snap, t.ego, horizon) if where == "ahead" else view_from_rear(snap, t.ego, horizon)
            try:
                out[k] = logic.evaluate(snap, view, f)
            except (LookupError, ValueError) as exc:
                raise EvaluationError(f"usl({text!r}): {exc}", k) from None
        return out


# ------------------------------------------------------------------- checks


def find_reference_points(trace, trigger, edges: str = "rising", evaluator: Optional[ColumnEvaluator] = None) -> list[int]:
    """Steps where the trigger rises (or, with ``edges="all"``, every true step)."""
    if isinstance(trigger, str):
        trigger = parse_predicate(trigger)
    ev = evaluator or ColumnEvaluator(trace if isinstance(trace, TraceTable) else TraceTable(trace))
    col = ev(trigger)
    if edges == "all":
        return [int(k) for k in np.flatnonzero(col)]
    prev = np.zeros_like(col)
    prev[1:] = col[:-1]
    return [int(k) for k in np.flatnonzero(col & ~prev)]


@dataclass(frozen=True)
class Failure:
    reference: Optional[int]
    step: int
    values: dict

    def to_dict(self) -> dict:
        return {"reference": self.reference, "step": self.step, "values": self.values}


@dataclass
class AssertionResult:
    name: str
    kind: str
    verdict: str
    reference_points: list[int] = field(default_factory=list)
    failures: list[Failure] = field(default_factory=list)
    clipped: list[int] = field(default_factory=list)
    flavor: Optional[str] = None
    window: Optional[float] = None

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": KIND_LABELS[self.kind], "verdict": self.verdict}
        if self.flavor:
            d["flavor"] = self.flavor
            d["window"] = self.window
        d["reference_points"] = list(self.reference_points)
        d["failures"] = [f.to_dict() for f in self.failures]
        d["clipped"] = list(self.clipped)
        return d


def _py(v):
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return v


def _values(ev: ColumnEvaluator, node: Node, k: int) -> dict:
    return {format_predicate(leaf): _py(ev(leaf)[k]) for leaf in leaves(node)}


def window_steps(table: TraceTable, assertion: Assertion, ref: int) -> tuple[np.ndarray, bool]:
    """Indices of the window of ``ref`` and whether the window was clipped."""
    w = assertion.window
    idx = np.arange(table.n)
    if assertion.flavor == "temporal":
        tr = table.time[ref]
        if assertion.kind == "pre":
            mask = (idx < ref) & (table.time >= tr - w - TIME_TOL)
            clipped = tr - w < table.time[0] - TIME_TOL
        else:
            mask = (idx > ref) & (table.time <= tr + w + TIME_TOL)
            clipped = tr + w > table.time[-1] + TIME_TOL
        return np.flatnonzero(mask), bool(clipped)
    pos = table.cols[table.ego]["pos"]
    pr = pos[ref]
    with np.errstate(invalid="ignore"):
        if assertion.kind == "pre":
            d = pr - pos
            mask = (idx < ref) & (d >= -TOL) & (d <= w + TOL)
            seen = pos[:ref + 1]
            clipped = not bool(np.any(pr - seen >= w - TOL))
        else:
            d = pos - pr
            mask = (idx > ref) & (d >= -TOL) & (d <= w + TOL)
            seen = pos[ref:]
            clipped = not bool(np.any(seen - pr >= w - TOL))
    return np.flatnonzero(mask), clipped


def check_assertion(trace, assertion: Assertion, evaluator: Optional[ColumnEvaluator] = None) -> AssertionResult:
    ev = evaluator or ColumnEvaluator(trace if isinstance(trace, TraceTable) else TraceTable(trace))
    table = ev.t
    cond = ev(assertion.condition)
    res = AssertionResult(assertion.name, assertion.kind, "pass", flavor=assertion.flavor, window=assertion.window)
    if assertion.kind == "invariant":
        for k in np.flatnonzero(~cond):
            res.failures.append(Failure(None, int(k), _values(ev, assertion.condition, int(k))))
    else:
        refs = find_reference_points(table, assertion.trigger, assertion.edges, ev)
        res.reference_points = refs
        if not refs:
            res.verdict = "vacuous"
            return res
        for r in refs:
            if assertion.kind == "execution":
                if not cond[r]:
                    res.failures.append(Failure(r, r, _values(ev, assertion.condition, r)))
                continue
            steps, clipped = window_steps(table, assertion, r)
            if clipped:
                res.clipped.append(r)
            for k in steps[~cond[steps]]:
                res.failures.append(Failure(r, int(k), _values(ev, assertion.condition, int(k))))
    if res.failures:
        res.verdict = "fail"
    return res


@dataclass
class SuiteResult:
    results: list[AssertionResult]
    errors: list[dict] = field(default_factory=list)

    @property
    def summary(self) -> dict:
        s = {v: 0 for v in VERDICTS}
        for r in self.results:
            s[r.verdict] += 1
        s["error"] = len(self.errors)
        return s

    @property
    def ok(self) -> bool:
        return not self.errors and all(r.verdict != "fail" for r in self.results)

    def to_dict(self) -> dict:
        return {"summary": self.summary, "results": [r.to_dict() for r in self.results], "errors": self.errors}


def check_suite(trace, assertions: Sequence[Assertion]) -> SuiteResult:
    """Evaluate every assertion on the same trace; one failing assertion never stops the rest."""
    table = trace if isinstance(trace, TraceTable) else TraceTable(trace)
    ev = ColumnEvaluator(table)
    out = SuiteResult([])
    for a in assertions:
        try:
            out.results.append(check_assertion(table, a, ev))
        except (PredicateError, EvaluationError) as exc:
            out.errors.append({"name": a.name, "error": str(exc), "step": getattr(exc, "step", None)})
    return out


# ------------------------------------------------------------------ reports


def render_json(suite: SuiteResult, assertions: Optional[Sequence[Assertion]] = None, trace: Optional[Trace] = None) -> str:
    d = suite.to_dict()
    if trace is not None:
        d["trace"] = {
            "scenario_digest": trace.header.get("scenario_digest"),
            "controller_digest": trace.header.get("controller_digest"),
            "steps": len(trace),
        }
    if assertions is not None:
        d["assertions"] = [a.to_dict() for a in assertions]
    return json.dumps(d, indent=2, sort_keys=False) + "\n"


def render_text(suite: SuiteResult, max_failures: int = 5) -> str:
    s = suite.summary
    lines = [f"{s['pass']} pass / {s['fail']} fail / {s['vacuous']} vacuous" + (f" / {s['error']} error" if s["error"] else "")]
    for r in suite.results:
        kind = KIND_LABELS[r.kind] + (f" ({r.flavor}, window {_fmt_num(r.window)})" if r.flavor else "")
        lines.append(f"[{r.verdict.upper():7}] {r.name}: {kind}")
        if r.kind != "invariant":
            refs = r.reference_points
            shown = ", ".join(map(str, refs[:10])) + (" ..." if len(refs) > 10 else "")
            lines.append(f"          reference points: {shown or 'none'}")
        if r.clipped:
            lines.append(f"          window clipped at trace boundary for reference(s) {r.clipped}")
        for f in r.failures[:max_failures]:
            at = f"step {f.step}" + (f" (reference {f.reference})" if f.reference is not None else "")
            vals = ", ".join(f"{k}={v}" for k, v in f.values.items())
            lines.append(f"          fails at {at}: {vals}")
        if len(r.failures) > max_failures:
            lines.append(f"          ... {len(r.failures) - max_failures} more failing step(s)")
    for e in suite.errors:
        lines.append(f"[ERROR  ] {e['name']}: {e['error']}")
    return "\n".join(lines) + "\n"


def export_csv(trace: Trace, fh) -> None:
    """Flat table (one row per step) for external tools."""
    obs = list(trace.header.get("observations", {}))
    agents = list(trace.header["agents"])
    fields = ("lane", "pos", "speed", "accel", "turn_signal", "aut")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["step", "time", "location", "action"] + obs + [f"{a}.{f}" for a in agents for f in fields])
    for s in trace.steps:
        by_id = {a["id"]: a for a in s["agents"]}
        row = [s["step"], s["time"], s["location"], s.get("action", "")]
        row += [int(bool(s["observations"].get(o, False))) for o in obs]
        for a in agents:
            rec = by_id.get(a)
            row += [("" if rec is None else rec[f]) for f in fields]
        w.writerow(row)
