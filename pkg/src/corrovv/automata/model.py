"""Timed automata for traffic-rule controllers, rule diagrams and properties."""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import yaml

from . import dbm

DEFAULT_TIME_UNIT = 0.1
OPS = ("<", "<=", "==", ">=", ">")


class ModelError(ValueError):
    """Ill-formed automaton, diagram, environment or property."""


# ---------------------------------------------------------- clock constraints


@dataclass(frozen=True)
class ClockConstraint:
    """``clock [- other] op constant``."""

    clock: str
    op: str
    value: int
    other: Optional[str] = None

    def __str__(self) -> str:
        lhs = self.clock if self.other is None else f"{self.clock} - {self.other}"
        return f"{lhs} {self.op} {self.value}"

    def to_dbm(self, index: Mapping[str, int]) -> list[dbm.Constraint]:
        i = index[self.clock]
        j = 0 if self.other is None else index[self.other]
        c = self.value
        out = []
        if self.op in ("<", "<=", "=="):
            out.append(dbm.Constraint(i, j, dbm.bound(c, self.op == "<")))
        if self.op in (">", ">=", "=="):
            out.append(dbm.Constraint(j, i, dbm.bound(-c, self.op == ">")))
        return out

    def holds(self, values: Mapping[str, object]) -> bool:
        d = values[self.clock] - (values[self.other] if self.other else 0)
        return {
            "<": d < self.value,
            "<=": d <= self.value,
            "==": d == self.value,
            ">=": d >= self.value,
            ">": d > self.value,
        }[self.op]


_CC = re.compile(
    r"^\s*([A-Za-z_]\w*)\s*(?:-\s*([A-Za-z_]\w*)\s*)?(<=|>=|==|=|<|>)\s*(-?\d+(?:\.\d+)?)\s*$"
)


def parse_clock_constraints(text: Union[str, Sequence[str], None]) -> tuple[ClockConstraint, ...]:
    """Parse a conjunction such as ``"x >= 2 & x - y < 3"``."""
    if text is None:
        return ()
    parts = text if isinstance(text, (list, tuple)) else [p for p in str(text).split("&")]
    out = []
    for p in parts:
        p = str(p).strip()
        if not p or p == "true":
            continue
        m = _CC.match(p)
        if not m:
            raise ModelError(f"malformed clock constraint {p!r}")
        value = float(m.group(4))
        if value != int(value):
            raise ModelError(f"clock constant must be an integer: {p!r}")
        op = "==" if m.group(3) == "=" else m.group(3)
        out.append(ClockConstraint(m.group(1), op, int(value), m.group(2)))
    return tuple(out)


def parse_literals(text: Union[str, Sequence[str], None]) -> tuple[tuple[str, bool], ...]:
    """Conjunction of observation literals, e.g. ``"stop_sign_ahead & !safe_gap"``."""
    if text is None:
        return ()
    parts = text if isinstance(text, (list, tuple)) else str(text).split("&")
    out = []
    for p in parts:
        p = str(p).strip()
        if not p or p == "true":
            continue
        neg = p.startswith("!")
        name = p[1:].strip() if neg else p
        if not re.fullmatch(r"[A-Za-z_]\w*", name):
            raise ModelError(f"malformed observation literal {p!r}")
        out.append((name, not neg))
    return tuple(out)


def format_literals(lits: Iterable[tuple[str, bool]]) -> str:
    return " & ".join(n if v else f"!{n}" for n, v in lits)


# ----------------------------------------------------------------- automaton


@dataclass(frozen=True)
class Location:
    name: str
    invariant: tuple[ClockConstraint, ...] = ()
    action: Optional[str] = None


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    guard: tuple[ClockConstraint, ...] = ()
    observe: tuple[tuple[str, bool], ...] = ()
    action: str = ""
    resets: tuple[str, ...] = ()


@dataclass(frozen=True)
class ObservationParameter:
    """A physical threshold an observation stands for (exported as an assumption)."""

    parameter: str
    value: float
    relation: str = ">="


@dataclass(frozen=True)
class DurationBound:
    step: str
    min_duration: float
    max_duration: Optional[float]
    max_name: Optional[str] = None
    min_name: Optional[str] = None


@dataclass
class TimedAutomaton:
    name: str
    clocks: tuple[str, ...]
    observations: tuple[str, ...]
    locations: tuple[Location, ...]
    initial: str
    edges: tuple[Edge, ...]
    time_unit: float = DEFAULT_TIME_UNIT
    terminal: Optional[str] = None
    observation_params: dict = field(default_factory=dict)
    durations: tuple[DurationBound, ...] = ()

    def __post_init__(self):
        self.clocks = tuple(self.clocks)
        self.observations = tuple(self.observations)
        self.locations = tuple(self.locations)
        self.edges = tuple(self.edges)
        self.validate()

    def validate(self) -> None:
        names = [loc.name for loc in self.locations]
        if len(set(names)) != len(names):
            raise ModelError(f"{self.name}: duplicate location names")
        if len(set(self.clocks)) != len(self.clocks):
            raise ModelError(f"{self.name}: duplicate clock names")
        if self.initial not in names:
            raise ModelError(f"{self.name}: initial location {self.initial!r} not declared")
        if not self.time_unit > 0:
            raise ModelError(f"{self.name}: time_unit must be > 0")
        clocks = set(self.clocks)
        obs = set(self.observations)

        def check_cc(cs, where):
            for c in cs:
                for x in (c.clock, c.other):
                    if x is not None and x not in clocks:
                        raise ModelError(f"{self.name}: {where} references undeclared clock {x!r}")

        for loc in self.locations:
            check_cc(loc.invariant, f"invariant of {loc.name}")
            for c in loc.invariant:
                if c.op not in ("<", "<=") or c.other is not None:
                    raise ModelError(f"{self.name}: invariant of {loc.name} must be an upper bound, got {c}")
        for e in self.edges:
            for end in (e.source, e.target):
                if end not in names:
                    raise ModelError(f"{self.name}: edge references undeclared location {end!r}")
            check_cc(e.guard, f"guard {e.source}->{e.target}")
            for o, _ in e.observe:
                if o not in obs:
                    raise ModelError(f"{self.name}: edge {e.source}->{e.target} observes undeclared {o!r}")
            for x in e.resets:
                if x not in clocks:
                    raise ModelError(f"{self.name}: edge {e.source}->{e.target} resets undeclared clock {x!r}")

    def location(self, name: str) -> Location:
        for loc in self.locations:
            if loc.name == name:
                return loc
        raise ModelError(f"{self.name}: unknown location {name!r}")

    def clock_index(self) -> dict[str, int]:
        return {c: k + 1 for k, c in enumerate(self.clocks)}

    def max_constant(self) -> int:
        cs = [abs(c.value) for loc in self.locations for c in loc.invariant]
        cs += [abs(c.value) for e in self.edges for c in e.guard]
        return max(cs, default=0)

    def action_of(self, location: str) -> str:
        return self.location(location).action or location

    def seconds(self, ticks: float) -> float:
        return ticks * self.time_unit

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "time_unit": self.time_unit,
            "clocks": list(self.clocks),
            "observations": {
                o: (
                    {
                        "parameter": self.observation_params[o].parameter,
                        "value": self.observation_params[o].value,
                        "relation": self.observation_params[o].relation,
                    }
                    if o in self.observation_params
                    else {}
                )
                for o in self.observations
            },
            "locations": [],
            "edges": [],
        }
        for loc in self.locations:
            item = {"name": loc.name}
            if loc.name == self.initial:
                item["initial"] = True
            if loc.name == self.terminal:
                item["terminal"] = True
            if loc.invariant:
                item["invariant"] = " & ".join(map(str, loc.invariant))
            if loc.action:
                item["action"] = loc.action
            d["locations"].append(item)
        for e in self.edges:
            item = {"source": e.source, "target": e.target}
            if e.guard:
                item["guard"] = " & ".join(map(str, e.guard))
            if e.observe:
                item["observe"] = format_literals(e.observe)
            if e.action:
                item["action"] = e.action
            if e.resets:
                item["reset"] = list(e.resets)
            d["edges"].append(item)
        if self.durations:
            d["durations"] = [
                {
                    "step": b.step,
                    "min": b.min_duration,
                    "max": b.max_duration,
                    **({"max_name": b.max_name} if b.max_name else {}),
                    **({"min_name": b.min_name} if b.min_name else {}),
                }
                for b in self.durations
            ]
        return d


# --------------------------------------------------------------- environment


@dataclass(frozen=True)
class ObservationEnvironment:
    """Which observation valuations the environment may present per location.

    ``restrictions`` maps a location (or ``"*"`` for all) to a conjunction of
    literals.  Without restrictions every valuation is possible.
    """

    restrictions: tuple[tuple[str, tuple[tuple[str, bool], ...]], ...] = ()

    @classmethod
    def from_mapping(cls, m: Optional[Mapping[str, object]]) -> "ObservationEnvironment":
        if not m:
            return cls()
        return cls(tuple((str(k), parse_literals(v)) for k, v in m.items()))

    def is_free(self) -> bool:
        return not self.restrictions

    def literals_for(self, location: str) -> tuple[tuple[str, bool], ...]:
        out = []
        for loc, lits in self.restrictions:
            if loc in ("*", location):
                out.extend(lits)
        return tuple(out)

    def allows(self, automaton: TimedAutomaton, location: str, valuation: tuple[bool, ...]) -> bool:
        pos = {o: k for k, o in enumerate(automaton.observations)}
        return all(valuation[pos[o]] == v for o, v in self.literals_for(location))

    def allowed(self, automaton: TimedAutomaton, location: str) -> list[tuple[bool, ...]]:
        return [
            v
            for v in itertools.product((False, True), repeat=len(automaton.observations))
            if self.allows(automaton, location, v)
        ]

    def validate(self, automaton: TimedAutomaton) -> None:
        names = {loc.name for loc in automaton.locations}
        for loc, lits in self.restrictions:
            if loc != "*" and loc not in names:
                raise ModelError(f"environment references undeclared location {loc!r}")
            for o, _ in lits:
                if o not in automaton.observations:
                    raise ModelError(f"environment references undeclared observation {o!r}")

    def to_dict(self) -> dict:
        return {loc: format_literals(lits) for loc, lits in self.restrictions}


# ------------------------------------------------------------------ property


@dataclass(frozen=True)
class BadAtom:
    """``at(L)``, ``visited(L)``, ``seen(o)``, a bare observation, or ``true``."""

    kind: str
    name: str = ""


@dataclass(frozen=True)
class BadNot:
    arg: "BadExpr"


@dataclass(frozen=True)
class BadAnd:
    left: "BadExpr"
    right: "BadExpr"


@dataclass(frozen=True)
class BadOr:
    left: "BadExpr"
    right: "BadExpr"


BadExpr = Union[BadAtom, BadNot, BadAnd, BadOr]

_BAD_TOKEN = re.compile(r"\s*(?:(?P<id>[A-Za-z_]\w*)|(?P<op>[!&|()]))")


def parse_bad(text: str) -> BadExpr:
    toks = []
    i = 0
    text = str(text)
    while i < len(text):
        if text[i:].strip() == "":
            break
        m = _BAD_TOKEN.match(text, i)
        if not m:
            raise ModelError(f"bad predicate: unexpected character at column {i + 1}: {text!r}")
        toks.append(m.group("id") or m.group("op"))
        i = m.end()
    toks.append(None)
    pos = 0

    def peek():
        return toks[pos]

    def take():
        nonlocal pos
        t = toks[pos]
        pos += 1
        return t

    def expect(t):
        got = take()
        if got != t:
            raise ModelError(f"bad predicate: expected {t!r}, found {got!r} in {text!r}")

    def disj():
        e = conj()
        while peek() == "|":
            take()
            e = BadOr(e, conj())
        return e

    def conj():
        e = unary()
        while peek() == "&":
            take()
            e = BadAnd(e, unary())
        return e

    def unary():
        if peek() == "!":
            take()
            return BadNot(unary())
        if peek() == "(":
            take()
            e = disj()
            expect(")")
            return e
        t = take()
        if t is None or not re.fullmatch(r"[A-Za-z_]\w*", t):
            raise ModelError(f"bad predicate: expected atom, found {t!r} in {text!r}")
        if t in ("at", "visited", "seen"):
            expect("(")
            name = take()
            if name is None or not re.fullmatch(r"[A-Za-z_]\w*", name):
                raise ModelError(f"bad predicate: expected name in {t}(...)")
            expect(")")
            return BadAtom(t, name)
        if t == "true":
            return BadAtom("true")
        if t == "false":
            return BadNot(BadAtom("true"))
        return BadAtom("obs", t)

    e = disj()
    if peek() is not None:
        raise ModelError(f"bad predicate: trailing {peek()!r} in {text!r}")
    return e


def format_bad(e: BadExpr, ctx: int = 0) -> str:
    if isinstance(e, BadAtom):
        if e.kind == "true":
            return "true"
        if e.kind == "obs":
            return e.name
        return f"{e.kind}({e.name})"
    if isinstance(e, BadNot):
        return "!" + format_bad(e.arg, 3)
    if isinstance(e, BadAnd):
        s = f"{format_bad(e.left, 2)} & {format_bad(e.right, 3)}"
        return f"({s})" if ctx > 2 else s
    s = f"{format_bad(e.left, 1)} | {format_bad(e.right, 2)}"
    return f"({s})" if ctx > 1 else s


def bad_atoms(e: BadExpr) -> list[BadAtom]:
    if isinstance(e, BadAtom):
        return [e]
    if isinstance(e, BadNot):
        return bad_atoms(e.arg)
    return bad_atoms(e.left) + bad_atoms(e.right)


@dataclass(frozen=True)
class SafetyProperty:
    """The automaton must never reach a state satisfying ``bad``."""

    name: str
    bad: BadExpr
    clock: tuple[ClockConstraint, ...] = ()
    description: str = ""

    @classmethod
    def parse(cls, name: str, bad: str, clock: Optional[str] = None, description: str = "") -> "SafetyProperty":
        return cls(name, parse_bad(bad), parse_clock_constraints(clock), description)

    def validate(self, automaton: TimedAutomaton) -> None:
        # A location the controller lacks is simply never occupied: one property
        # is checked against several controllers (a rolling-stop variant has no
        # ``stopped``).  Observations form the shared interface and stay strict.
        for a in bad_atoms(self.bad):
            if a.kind in ("seen", "obs") and a.name not in automaton.observations:
                raise ModelError(f"property {self.name}: undeclared observation {a.name!r}")
        for c in self.clock:
            for x in (c.clock, c.other):
                if x is not None and x not in automaton.clocks:
                    raise ModelError(f"property {self.name}: undeclared clock {x!r}")

    def history_atoms(self) -> tuple[BadAtom, ...]:
        seen = []
        for a in bad_atoms(self.bad):
            if a.kind in ("visited", "seen") and a not in seen:
                seen.append(a)
        return tuple(seen)

    def to_dict(self) -> dict:
        d = {"name": self.name, "bad": format_bad(self.bad)}
        if self.clock:
            d["clock"] = " & ".join(map(str, self.clock))
        if self.description:
            d["description"] = self.description
        return d


# ------------------------------------------------------------- rule diagrams


@dataclass(frozen=True)
class Step:
    name: str
    action: str
    trigger: tuple[tuple[str, bool], ...] = ()
    min_duration: float = 0.0
    max_duration: Optional[float] = None
    next: Optional[tuple[str, ...]] = None
    max_name: Optional[str] = None
    min_name: Optional[str] = None


@dataclass
class RuleDiagram:
    """Ordered behaviour steps; ``next`` lists branch successors of a step."""

    name: str
    steps: tuple[Step, ...]
    observations: tuple[str, ...] = ()
    observation_params: dict = field(default_factory=dict)
    time_unit: float = DEFAULT_TIME_UNIT
    clock: str = "t"

    def validate(self) -> None:
        names = [s.name for s in self.steps]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise ModelError(f"diagram {self.name}: duplicate step name(s) {dup}")
        reserved = {"start", "done"} & set(names)
        if reserved:
            raise ModelError(f"diagram {self.name}: step names {sorted(reserved)} are reserved")
        for s in self.steps:
            if s.min_duration < 0 or (s.max_duration is not None and s.max_duration < 0):
                raise ModelError(f"diagram {self.name}: step {s.name} has a negative duration")
            if s.max_duration is not None and s.min_duration > s.max_duration:
                raise ModelError(f"diagram {self.name}: step {s.name} has min > max")
            for n in s.next or ():
                if n not in names and n != "done":
                    raise ModelError(f"diagram {self.name}: step {s.name} branches to unknown {n!r}")


def _ticks(seconds: float, unit: float, what: str) -> int:
    t = seconds / unit
    r = round(t)
    if abs(t - r) > 1e-9 * max(1.0, abs(t)):
        raise ModelError(f"{what}: {seconds} s is not a whole number of {unit} s time units")
    return int(r)


def compile_diagram(diagram: RuleDiagram) -> TimedAutomaton:
    """Translate a rule diagram into a timed automaton.

    Each step becomes a location whose clock is reset on entry, bounded by the
    step's maximum duration and left no earlier than its minimum duration once
    the successor's trigger observations hold.
    """
    diagram.validate()
    unit = diagram.time_unit
    t = diagram.clock
    steps = diagram.steps
    observations = list(diagram.observations)
    for s in steps:
        for o, _ in s.trigger:
            if o not in observations:
                observations.append(o)
    if not steps:
        loc = Location("start", (), "approach")
        return TimedAutomaton(
            diagram.name, (t,), tuple(observations), (loc,), "start", (), unit,
            terminal="start", observation_params=dict(diagram.observation_params),
        )
    by_name = {s.name: s for s in steps}
    locations = [Location("start", (), "approach")]
    for s in steps:
        inv = ()
        if s.max_duration is not None:
            inv = (ClockConstraint(t, "<=", _ticks(s.max_duration, unit, f"step {s.name}")),)
        locations.append(Location(s.name, inv, s.action))
    locations.append(Location("done", (), steps[-1].action))
    edges = [Edge("start", steps[0].name, (), steps[0].trigger, f"enter_{steps[0].name}", (t,))]
    for k, s in enumerate(steps):
        succ = s.next if s.next is not None else ((steps[k + 1].name,) if k + 1 < len(steps) else ("done",))
        guard = ()
        if s.min_duration > 0:
            guard = (ClockConstraint(t, ">=", _ticks(s.min_duration, unit, f"step {s.name}")),)
        for n in succ:
            trig = by_name[n].trigger if n in by_name else ()
            edges.append(Edge(s.name, n, guard, trig, f"enter_{n}", (t,)))
    durations = tuple(
        DurationBound(s.name, s.min_duration, s.max_duration, s.max_name, s.min_name)
        for s in steps
        if s.min_duration > 0 or s.max_duration is not None
    )
    return TimedAutomaton(
        diagram.name,
        (t,),
        tuple(observations),
        tuple(locations),
        "start",
        tuple(edges),
        unit,
        terminal="done",
        observation_params=dict(diagram.observation_params),
        durations=durations,
    )


# --------------------------------------------------------------------- files

_TOP_KEYS = {
    "name", "time_unit", "clocks", "observations", "locations", "edges",
    "diagram", "environment", "property", "durations",
}


def _obs_section(raw) -> tuple[tuple[str, ...], dict]:
    if raw is None:
        return (), {}
    if isinstance(raw, list):
        return tuple(str(o) for o in raw), {}
    names, params = [], {}
    for o, spec in raw.items():
        names.append(str(o))
        if spec and "parameter" in spec:
            params[str(o)] = ObservationParameter(
                str(spec["parameter"]), float(spec["value"]), str(spec.get("relation", ">="))
            )
    return tuple(names), params


def diagram_from_dict(d: Mapping, time_unit: float = DEFAULT_TIME_UNIT, observations=None) -> RuleDiagram:
    obs, params = _obs_section(observations if observations is not None else d.get("observations"))
    steps = []
    for k, s in enumerate(d.get("steps") or ()):
        if "name" not in s or "action" not in s:
            raise ModelError(f"diagram step #{k + 1}: 'name' and 'action' are required")
        mx = s.get("max_duration")
        steps.append(
            Step(
                name=str(s["name"]),
                action=str(s["action"]),
                trigger=parse_literals(s.get("trigger")),
                min_duration=float(s.get("min_duration", 0.0)),
                max_duration=None if mx in (None, "inf", math.inf) else float(mx),
                next=tuple(s["next"]) if "next" in s else None,
                max_name=s.get("max_name"),
                min_name=s.get("min_name"),
            )
        )
    return RuleDiagram(
        str(d.get("name", "diagram")), tuple(steps), obs, params,
        float(d.get("time_unit", time_unit)), str(d.get("clock", "t")),
    )


def automaton_from_dict(d: Mapping) -> TimedAutomaton:
    extra = set(d) - _TOP_KEYS
    if extra:
        raise ModelError(f"unknown section(s) {sorted(extra)}")
    unit = float(d.get("time_unit", DEFAULT_TIME_UNIT))
    if "diagram" in d:
        diag = dict(d["diagram"])
        diag.setdefault("name", d.get("name", "diagram"))
        diag.setdefault("time_unit", unit)
        return compile_diagram(diagram_from_dict(diag, unit, d.get("observations", diag.get("observations"))))
    for key in ("clocks", "locations", "edges"):
        if key not in d:
            raise ModelError(f"missing section {key!r}")
    obs, params = _obs_section(d.get("observations"))
    locations, initial, terminal = [], None, None
    for item in d["locations"]:
        name = str(item["name"])
        locations.append(Location(name, parse_clock_constraints(item.get("invariant")), item.get("action")))
        if item.get("initial"):
            if initial is not None:
                raise ModelError("more than one initial location")
            initial = name
        if item.get("terminal"):
            terminal = name
    if initial is None:
        raise ModelError("no initial location")
    edges = []
    for item in d["edges"]:
        edges.append(
            Edge(
                str(item["source"]),
                str(item["target"]),
                parse_clock_constraints(item.get("guard")),
                parse_literals(item.get("observe")),
                str(item.get("action", "")),
                tuple(str(x) for x in item.get("reset") or ()),
            )
        )
    durations = tuple(
        DurationBound(str(b["step"]), float(b.get("min", 0.0)),
                      None if b.get("max") is None else float(b["max"]), b.get("max_name"), b.get("min_name"))
        for b in d.get("durations") or ()
    )
    return TimedAutomaton(
        str(d.get("name", "automaton")), tuple(str(c) for c in d["clocks"]), obs,
        tuple(locations), initial, tuple(edges), unit, terminal, params, durations,
    )


def property_from_dict(d: Mapping) -> SafetyProperty:
    if "bad" not in d:
        raise ModelError("property: missing 'bad' predicate")
    return SafetyProperty.parse(str(d.get("name", "property")), d["bad"], d.get("clock"), str(d.get("description", "")))


@dataclass
class ModelFile:
    automaton: Optional[TimedAutomaton]
    property: Optional[SafetyProperty]
    environment: ObservationEnvironment


def load_model(path) -> ModelFile:
    """Read an automaton/diagram/property file (YAML key-value tree)."""
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    return model_from_dict(data)


def model_from_dict(data: Mapping) -> ModelFile:
    if not isinstance(data, Mapping):
        raise ModelError("model file must be a mapping")
    prop = property_from_dict(data["property"]) if "property" in data else None
    env = ObservationEnvironment.from_mapping(data.get("environment"))
    body = {k: v for k, v in data.items() if k not in ("property", "environment")}
    aut = automaton_from_dict(body) if ({"locations", "diagram"} & set(body)) else None
    if aut is not None:
        env.validate(aut)
        if prop is not None:
            prop.validate(aut)
    return ModelFile(aut, prop, env)


def dump_automaton(automaton: TimedAutomaton) -> str:
    return yaml.safe_dump(automaton.to_dict(), sort_keys=False)
