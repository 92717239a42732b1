"""Deterministic closed-loop kinematic simulation of rule controllers.

One ego agent is driven by a timed-automaton controller; every other agent
follows a scripted acceleration timeline.  Integration is explicit Euler at a
fixed step.  The world state is rounded to 9 significant digits after every
step, which is exactly the precision of the trace file, so a snapshot rebuilt
from a trace record equals the in-memory snapshot it was recorded from.
"""
from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Optional, Sequence

import yaml

from . import logic
from .automata.model import TimedAutomaton
from .traffic import (
    AGENT_KINDS,
    DEFAULT_B_MAX,
    DEFAULT_PEDESTRIAN_WIDTH,
    TOL,
    Agent,
    RoadNetwork,
    Snapshot,
    TrafficError,
    signs_on,
    view_ahead,
    view_from_rear,
)

TRACE_FORMAT = "corrovv-trace/1"
ACTIONS = ("approach", "decelerate", "stopped", "proceed")
STOP_CLASS = ("decelerate", "stopped")
PROCEED_CLASS = ("approach", "proceed")
EGO_SYMBOL = "E"


class ScenarioError(ValueError):
    """Invalid scenario file or value."""


class SimulationError(RuntimeError):
    """A run could not continue; ``step`` is the failing step index."""

    def __init__(self, message: str, step: int):
        super().__init__(f"step {step}: {message}")
        self.step = step


def q(x: float) -> float:
    """Round to 9 significant digits (the trace precision); no negative zero."""
    return float(f"{x:.9g}") + 0.0


def digest(obj) -> str:
    data = json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(data.encode("utf-8")).hexdigest()


# ----------------------------------------------------------------- scenario


@dataclass(frozen=True)
class AgentSpec:
    """Initial state plus longitudinal limits of one agent."""

    agent: Agent
    a_max: float = 2.0
    v_max: float = 15.0
    cruise: Optional[float] = None

    @property
    def id(self) -> str:
        return self.agent.id

    @property
    def cruise_speed(self) -> float:
        return self.agent.speed if self.cruise is None else self.cruise


@dataclass(frozen=True)
class Event:
    """From ``start`` (until ``end``) the agent accelerates at ``accel`` towards ``target_speed``."""

    agent: str
    start: float
    accel: float
    target_speed: Optional[float] = None
    end: Optional[float] = None


@dataclass(frozen=True)
class ObservationSpec:
    """How a controller observation is computed from a snapshot.

    ``kind="formula"`` evaluates a spatial formula on a view ahead of (or,
    with ``view="rear"``, including) the ego reservation; ``kind="stop_line"``
    is true when the ego is at standstill within ``tolerance`` of a stop sign.
    """

    name: str
    kind: str = "formula"
    formula: str = ""
    horizon: float = 0.0
    view: str = "ahead"
    tolerance: float = 1.0

    def to_dict(self) -> dict:
        if self.kind == "stop_line":
            return {"kind": "stop_line", "tolerance": self.tolerance}
        return {"formula": self.formula, "horizon": self.horizon, "view": self.view}


DEFAULT_OBSERVATIONS = {
    "stop_sign_ahead": ObservationSpec("stop_sign_ahead", formula="sign(stop)", horizon=1.0),
    "safe_gap": ObservationSpec("safe_gap", formula="free & len >= size(E)", horizon=4.5),
    "at_stop_line": ObservationSpec("at_stop_line", kind="stop_line", tolerance=1.0),
    "crossing_ahead": ObservationSpec("crossing_ahead", formula="crossing", horizon=4.5),
}


@dataclass(frozen=True)
class Scenario:
    network: RoadNetwork
    agents: tuple[AgentSpec, ...]
    ego: str
    events: tuple[Event, ...] = ()
    duration: float = 10.0
    dt: float = 0.1
    seed: int = 0
    b_max: float = DEFAULT_B_MAX
    pedestrian_width: float = DEFAULT_PEDESTRIAN_WIDTH
    observations: tuple[ObservationSpec, ...] = tuple(DEFAULT_OBSERVATIONS.values())
    name: str = "scenario"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ScenarioError(f"sim.dt must be > 0, got {self.dt}")
        if not self.duration >= self.dt:
            raise ScenarioError(f"sim.duration ({self.duration}) must be >= sim.dt ({self.dt})")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ScenarioError(f"sim.seed must be an unsigned integer, got {self.seed!r}")
        ids = [a.id for a in self.agents]
        if self.ego not in ids:
            raise ScenarioError(f"ego {self.ego!r} is not among the agents {ids}")
        try:
            self.initial_snapshot()
        except TrafficError as exc:
            raise ScenarioError(f"agents: {exc}") from None
        for a in self.agents:
            if a.a_max < 0 or a.v_max <= 0:
                raise ScenarioError(f"agent {a.id}: a_max must be >= 0 and v_max > 0")
            if a.agent.speed > a.v_max + TOL:
                raise ScenarioError(f"agent {a.id}: speed {a.agent.speed} exceeds v_max {a.v_max}")
        for k, e in enumerate(self.events):
            where = f"events[{k}]"
            if e.agent not in ids:
                raise ScenarioError(f"{where}: unknown agent {e.agent!r}")
            if e.agent == self.ego:
                raise ScenarioError(f"{where}: the ego is driven by its controller and cannot be scripted")
            # Events past the end are legal (a shortened run never reaches them).
            for t in (e.start, e.end):
                if t is not None and not (t >= -TOL and math.isfinite(t)):
                    raise ScenarioError(f"{where}: time {t} must be a finite value >= 0")
            if e.end is not None and e.end < e.start:
                raise ScenarioError(f"{where}: end {e.end} before start {e.start}")
        names = [o.name for o in self.observations]
        if len(set(names)) != len(names):
            raise ScenarioError("sim.observations: duplicate names")
        for o in self.observations:
            if o.kind == "formula":
                try:
                    logic.parse_formula(o.formula)
                except logic.FormulaSyntaxError as exc:
                    raise ScenarioError(f"sim.observations.{o.name}: {exc}") from None
                if o.view not in ("ahead", "rear"):
                    raise ScenarioError(f"sim.observations.{o.name}: view must be 'ahead' or 'rear'")
            elif o.kind != "stop_line":
                raise ScenarioError(f"sim.observations.{o.name}: unknown kind {o.kind!r}")

    @property
    def steps(self) -> int:
        """Number of recorded steps, ``ceil(duration / dt) + 1``."""
        return math.ceil(self.duration / self.dt - 1e-9) + 1

    def spec(self, agent_id: str) -> AgentSpec:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise ScenarioError(f"unknown agent {agent_id!r}")

    def observation(self, name: str) -> ObservationSpec:
        for o in self.observations:
            if o.name == name:
                return o
        raise KeyError(name)

    def initial_snapshot(self) -> Snapshot:
        return Snapshot(self.network, tuple(a.agent for a in self.agents), 0.0, self.b_max, self.pedestrian_width)

    def to_dict(self) -> dict:
        agents = []
        for s in self.agents:
            a = s.agent
            d = {
                "id": a.id, "lane": a.lane, "pos": a.pos, "size": a.size, "speed": a.speed,
                "kind": a.kind, "aut": a.aut, "turn_signal": a.turn_signal,
                "a_max": s.a_max, "v_max": s.v_max,
            }
            if s.cruise is not None:
                d["cruise"] = s.cruise
            agents.append(d)
        events = []
        for e in self.events:
            d = {"agent": e.agent, "start": e.start, "accel": e.accel}
            if e.target_speed is not None:
                d["target_speed"] = e.target_speed
            if e.end is not None:
                d["end"] = e.end
            events.append(d)
        return {
            "name": self.name,
            "network": self.network.to_dict(),
            "agents": agents,
            "events": events,
            "sim": {
                "ego": self.ego,
                "duration": self.duration,
                "dt": self.dt,
                "seed": self.seed,
                "b_max": self.b_max,
                "pedestrian_width": self.pedestrian_width,
                "observations": {o.name: o.to_dict() for o in self.observations},
            },
        }

    def digest(self) -> str:
        return digest(self.to_dict())

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def with_sim(self, **kw) -> "Scenario":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


_AGENT_KEYS = {"id", "lane", "pos", "size", "speed", "accel", "kind", "aut", "turn_signal", "a_max", "v_max", "cruise"}
_EVENT_KEYS = {"agent", "start", "accel", "target_speed", "end"}
_SIM_KEYS = {"ego", "duration", "dt", "seed", "b_max", "pedestrian_width", "observations"}


def _num(d: Mapping, key: str, where: str, default=None) -> Optional[float]:
    if key not in d or d[key] is None:
        if default is None:
            raise ScenarioError(f"{where}: missing field {key!r}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{where}.{key}: expected a number, got {v!r}")
    return float(v)


def _observations_from(raw) -> tuple[ObservationSpec, ...]:
    obs = dict(DEFAULT_OBSERVATIONS)
    for name, spec in (raw or {}).items():
        where = f"sim.observations.{name}"
        if isinstance(spec, str):
            spec = {"formula": spec}
        if not isinstance(spec, Mapping):
            raise ScenarioError(f"{where}: expected a formula string or a mapping")
        extra = set(spec) - {"kind", "formula", "horizon", "view", "tolerance"}
        if extra:
            raise ScenarioError(f"{where}: unknown field(s) {sorted(extra)}")
        kind = spec.get("kind", "formula")
        if kind == "formula" and "formula" not in spec:
            raise ScenarioError(f"{where}: missing field 'formula'")
        obs[str(name)] = ObservationSpec(
            str(name), kind, str(spec.get("formula", "")),
            _num(spec, "horizon", where, 4.5), str(spec.get("view", "ahead")),
            _num(spec, "tolerance", where, 1.0),
        )
    return tuple(obs.values())


def scenario_from_dict(d: Mapping) -> Scenario:
    if not isinstance(d, Mapping):
        raise ScenarioError("scenario must be a mapping with sections network, agents, events, sim")
    extra = set(d) - {"name", "network", "agents", "events", "sim"}
    if extra:
        raise ScenarioError(f"unknown section(s) {sorted(extra)}")
    for sec in ("network", "agents", "sim"):
        if sec not in d:
            raise ScenarioError(f"missing section {sec!r}")
    try:
        net = RoadNetwork.from_dict(d["network"])
    except (TrafficError, KeyError, TypeError) as exc:
        raise ScenarioError(f"network: {exc}") from None
    specs = []
    for k, a in enumerate(d["agents"] or ()):
        where = f"agents[{k}]"
        if not isinstance(a, Mapping):
            raise ScenarioError(f"{where}: expected a mapping")
        extra = set(a) - _AGENT_KEYS
        if extra:
            raise ScenarioError(f"{where}: unknown field(s) {sorted(extra)}")
        for key in ("id", "lane"):
            if key not in a:
                raise ScenarioError(f"{where}: missing field {key!r}")
        kind = str(a.get("kind", "car"))
        if kind not in AGENT_KINDS:
            raise ScenarioError(f"{where}.kind: unknown kind {kind!r}")
        try:
            agent = Agent(
                id=str(a["id"]), lane=str(a["lane"]), pos=_num(a, "pos", where), size=_num(a, "size", where),
                speed=_num(a, "speed", where, 0.0), accel=_num(a, "accel", where, 0.0),
                aut=bool(a.get("aut", False)), turn_signal=str(a.get("turn_signal", "off")), kind=kind,
            )
        except TrafficError as exc:
            raise ScenarioError(f"{where}: {exc}") from None
        cruise = a.get("cruise")
        specs.append(
            AgentSpec(agent, _num(a, "a_max", where, 2.0), _num(a, "v_max", where, 15.0),
                      None if cruise is None else _num(a, "cruise", where))
        )
    events = []
    for k, e in enumerate(d.get("events") or ()):
        where = f"events[{k}]"
        extra = set(e) - _EVENT_KEYS
        if extra:
            raise ScenarioError(f"{where}: unknown field(s) {sorted(extra)}")
        if "agent" not in e:
            raise ScenarioError(f"{where}: missing field 'agent'")
        events.append(
            Event(str(e["agent"]), _num(e, "start", where), _num(e, "accel", where),
                  None if e.get("target_speed") is None else _num(e, "target_speed", where),
                  None if e.get("end") is None else _num(e, "end", where))
        )
    sim = d["sim"] or {}
    extra = set(sim) - _SIM_KEYS
    if extra:
        raise ScenarioError(f"sim: unknown field(s) {sorted(extra)}")
    if "ego" not in sim:
        raise ScenarioError("sim: missing field 'ego'")
    seed = sim.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ScenarioError(f"sim.seed: expected an unsigned integer, got {seed!r}")
    return Scenario(
        network=net,
        agents=tuple(specs),
        ego=str(sim["ego"]),
        events=tuple(events),
        duration=_num(sim, "duration", "sim"),
        dt=_num(sim, "dt", "sim", 0.1),
        seed=seed,
        b_max=_num(sim, "b_max", "sim", DEFAULT_B_MAX),
        pedestrian_width=_num(sim, "pedestrian_width", "sim", DEFAULT_PEDESTRIAN_WIDTH),
        observations=_observations_from(sim.get("observations")),
        name=str(d.get("name", "scenario")),
    )


def loads_scenario(text: str) -> Scenario:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"not a valid key-value file: {exc}") from None
    return scenario_from_dict(data)


def load_scenario(path) -> Scenario:
    return loads_scenario(Path(path).read_text(encoding="utf-8"))


# -------------------------------------------------------------- observation


class Observer:
    """Evaluates the configured observations for one ego."""

    def __init__(self, scenario: Scenario, names: Optional[Sequence[str]] = None):
        self.ego = scenario.ego
        specs = scenario.observations
        if names is not None:
            known = {o.name for o in specs}
            missing = [n for n in names if n not in known]
            if missing:
                raise ScenarioError(f"controller observation(s) {missing} are not bound to a formula")
        self.specs = specs
        self._formulas = {}
        for o in specs:
            if o.kind == "formula":
                f = logic.parse_formula(o.formula)
                if self.ego != EGO_SYMBOL:
                    f = logic.substitute(f, {EGO_SYMBOL: self.ego})
                self._formulas[o.name] = f

    def observe(self, snap: Snapshot) -> dict[str, bool]:
        out = {}
        for o in self.specs:
            if o.kind == "stop_line":
                out[o.name] = at_stop_line(snap, self.ego, o.tolerance)
            else:
                view = view_ahead(snap, self.ego, o.horizon) if o.view == "ahead" else view_from_rear(snap, self.ego, o.horizon)
                out[o.name] = logic.evaluate(snap, view, self._formulas[o.name])
        return out


def at_stop_line(snap: Snapshot, ego: str, tolerance: float = 1.0) -> bool:
    a = snap.agent(ego)
    if a.speed > TOL:
        return False
    return any(abs(a.pos - s.pos) <= tolerance + TOL for s in signs_on(snap, a.lane, "stop"))


# --------------------------------------------------------------- controller


@dataclass
class ControllerState:
    location: str
    clocks: dict[str, Fraction]


@dataclass(frozen=True)
class ScriptEntry:
    """Forced controller behaviour at ``step``: take ``edge`` (if any), show ``observations``."""

    step: int
    edge: Optional[int]
    observations: Mapping[str, bool]


@dataclass(frozen=True)
class ControlScript:
    """Drives a run along a model-checking witness.

    Observations are overridden from the first entry until ``release`` steps;
    afterwards the controller runs closed-loop again from wherever it is.
    """

    entries: tuple[ScriptEntry, ...]
    release: int

    def to_dict(self) -> dict:
        return {
            "entries": [{"step": e.step, "edge": e.edge, "observations": dict(e.observations)} for e in self.entries],
            "release": self.release,
        }


def action_command(action: str, speed: float, spec: AgentSpec, b_max: float, dt: float) -> float:
    """Longitudinal acceleration for a controller action."""
    if action == "decelerate" or action == "stopped":
        return -min(b_max, speed / dt)
    target = spec.cruise_speed
    if action in ("approach", "proceed"):
        if action == "proceed" and speed >= target:
            return 0.0 if speed == target else -min(b_max, (speed - target) / dt)
        return max(-b_max, min(spec.a_max, (target - speed) / dt))
    raise SimulationError(f"action {action!r} is not in the action table {ACTIONS}", -1)


def _event_accel(events: Sequence[Event], agent: str, t: float, speed: float, dt: float) -> float:
    active = None
    for e in events:
        if e.agent == agent and e.start <= t + 1e-9 and (e.end is None or t < e.end - 1e-9):
            active = e
    if active is None:
        return 0.0
    a = active.accel
    if active.target_speed is not None:
        gap = active.target_speed - speed
        if abs(gap) <= 1e-12:
            return 0.0
        if gap * a <= 0:
            return 0.0
        a = math.copysign(min(abs(a), abs(gap) / dt), a)
    return a


# --------------------------------------------------------------------- trace


def _rec_agent(a: Agent) -> dict:
    return {
        "id": a.id, "lane": a.lane, "pos": a.pos, "speed": a.speed, "accel": a.accel,
        "turn_signal": a.turn_signal, "aut": a.aut,
    }


@dataclass
class Trace:
    header: dict
    steps: list[dict] = field(default_factory=list)

    @property
    def ego(self) -> str:
        return self.header["ego"]

    @property
    def dt(self) -> float:
        return self.header["dt"]

    def __len__(self) -> int:
        return len(self.steps)

    def network(self) -> RoadNetwork:
        return RoadNetwork.from_dict(self.header["network"])

    def snapshot(self, k: int, network: Optional[RoadNetwork] = None) -> Snapshot:
        """Rebuild the world of step ``k`` from the recorded fields."""
        rec = self.steps[k]
        static = self.header["agents"]
        agents = tuple(
            Agent(a["id"], a["lane"], a["pos"], static[a["id"]]["size"], a["speed"], a["accel"],
                  a["aut"], a["turn_signal"], static[a["id"]]["kind"])
            for a in rec["agents"]
        )
        return Snapshot(network or self.network(), agents, rec["time"], self.header["b_max"],
                        self.header.get("pedestrian_width", DEFAULT_PEDESTRIAN_WIDTH))

    def dumps(self) -> str:
        buf = io.StringIO()
        self.write(buf)
        return buf.getvalue()

    def write(self, fh) -> None:
        fh.write(json.dumps(self.header, separators=(",", ":"), ensure_ascii=False) + "\n")
        for s in self.steps:
            fh.write(json.dumps(s, separators=(",", ":"), ensure_ascii=False) + "\n")

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            self.write(fh)

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()


class TraceError(ValueError):
    pass


def loads_trace(text: str) -> Trace:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TraceError("empty trace file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise TraceError(f"line 1: {exc}") from None
    if header.get("format") != TRACE_FORMAT:
        raise TraceError(f"line 1: not a trace header (format {header.get('format')!r})")
    steps = []
    for n, ln in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(ln)
        except json.JSONDecodeError as exc:
            raise TraceError(f"line {n}: {exc}") from None
        if rec.get("step") != len(steps):
            raise TraceError(f"line {n}: expected step {len(steps)}, got {rec.get('step')!r}")
        steps.append(rec)
    return Trace(header, steps)


def load_trace(path) -> Trace:
    return loads_trace(Path(path).read_text(encoding="utf-8"))


# ----------------------------------------------------------------------- run


@dataclass
class WorldState:
    step: int
    agents: tuple[Agent, ...]
    controller: ControllerState


def controller_digest(controller: TimedAutomaton) -> str:
    return digest(controller.to_dict())


def _header(scenario: Scenario, controller: TimedAutomaton, script: Optional[ControlScript]) -> dict:
    h = {
        "format": TRACE_FORMAT,
        "scenario": scenario.name,
        "scenario_digest": scenario.digest(),
        "controller": controller.name,
        "controller_digest": controller_digest(controller),
        "ego": scenario.ego,
        "dt": scenario.dt,
        "duration": scenario.duration,
        "seed": scenario.seed,
        "b_max": scenario.b_max,
        "pedestrian_width": scenario.pedestrian_width,
        "network": scenario.network.to_dict(),
        "agents": {
            s.id: {"size": s.agent.size, "kind": s.agent.kind, "a_max": s.a_max, "v_max": s.v_max}
            for s in scenario.agents
        },
        "observations": {o.name: o.to_dict() for o in scenario.observations},
        "controller_observations": list(controller.observations),
    }
    if script is not None:
        h["script"] = script.to_dict()
    return h


class Simulation:
    """Stateful single run; ``step_world`` advances it by one ``dt``."""

    def __init__(self, scenario: Scenario, controller: TimedAutomaton, script: Optional[ControlScript] = None):
        self.scenario = scenario
        self.controller = controller
        self.script = script
        self.observer = Observer(scenario, controller.observations)
        self.specs = {s.id: s for s in scenario.agents}
        self.tick = Fraction(str(scenario.dt)) / Fraction(str(controller.time_unit))
        self._script_at = {e.step: e for e in script.entries} if script else {}
        self._override: Optional[dict] = None
        agents = tuple(
            replace(a, pos=q(a.pos), speed=q(a.speed), accel=0.0) for a in (s.agent for s in scenario.agents)
        )
        self.state = WorldState(0, agents, ControllerState(controller.initial, {c: Fraction(0) for c in controller.clocks}))
        self.trace = Trace(_header(scenario, controller, script))
        self._check_invariant()

    def snapshot(self) -> Snapshot:
        sc = self.scenario
        return Snapshot(sc.network, self.state.agents, q(self.state.step * sc.dt), sc.b_max, sc.pedestrian_width)

    def _check_invariant(self) -> None:
        cs = self.state.controller
        loc = self.controller.location(cs.location)
        if not all(c.holds(cs.clocks) for c in loc.invariant):
            raise SimulationError(
                f"controller timelock: invariant of {cs.location!r} violated and no edge enabled", self.state.step
            )

    def _take(self, edge_index: int) -> None:
        e = self.controller.edges[edge_index]
        cs = self.state.controller
        cs.location = e.target
        for x in e.resets:
            cs.clocks[x] = Fraction(0)

    def step_world(self) -> dict:
        """Observe, let the controller react, record the step, integrate."""
        sc = self.scenario
        k = self.state.step
        snap = self.snapshot()
        obs = self.observer.observe(snap)
        entry = self._script_at.get(k)
        if entry is not None:
            self._override = dict(entry.observations)
        if self.script is not None and k >= self.script.release:
            self._override = None
        if self._override is not None:
            obs.update(self._override)
        cs = self.state.controller
        scripted = self.script is not None and k < self.script.release
        if entry is not None and entry.edge is not None:
            self._take(entry.edge)
        elif not scripted:
            for idx, e in enumerate(self.controller.edges):
                if e.source != cs.location:
                    continue
                if not all(c.holds(cs.clocks) for c in e.guard):
                    continue
                if any(obs.get(o) != v for o, v in e.observe):
                    continue
                self._take(idx)
                break
        self._check_invariant()
        action = self.controller.action_of(cs.location)
        t = q(k * sc.dt)
        commanded = []
        for a in self.state.agents:
            spec = self.specs[a.id]
            if a.id == sc.ego:
                try:
                    acc = action_command(action, a.speed, spec, sc.b_max, sc.dt)
                except SimulationError as exc:
                    raise SimulationError(str(exc).split(": ", 1)[-1], k) from None
            else:
                acc = _event_accel(sc.events, a.id, t, a.speed, sc.dt)
            # Keep speed inside [0, v_max] after the step.
            acc = max(-a.speed / sc.dt, min(acc, (spec.v_max - a.speed) / sc.dt))
            commanded.append(replace(a, accel=q(acc)))
        rec = {
            "step": k,
            "time": t,
            "agents": [_rec_agent(a) for a in commanded],
            "observations": {o.name: obs[o.name] for o in sc.observations},
            "location": cs.location,
            "action": action,
        }
        self.trace.steps.append(rec)
        nxt = []
        for a in commanded:
            pos = q(a.pos + a.speed * sc.dt)
            speed = q(min(max(a.speed + a.accel * sc.dt, 0.0), self.specs[a.id].v_max))
            if pos > sc.network.lane_length + TOL:
                if a.id == sc.ego:
                    raise SimulationError(f"ego {a.id} ran past the end of lane {a.lane!r}", k)
                continue
            nxt.append(replace(a, pos=pos, speed=speed))
        for c in cs.clocks:
            cs.clocks[c] += self.tick
        self.state = WorldState(k + 1, tuple(nxt), cs)
        return rec

    def run(self) -> Trace:
        n = self.scenario.steps
        while self.state.step < n:
            self.step_world()
        return self.trace


def run(scenario: Scenario, controller: TimedAutomaton, script: Optional[ControlScript] = None) -> Trace:
    """Simulate ``ceil(duration / dt) + 1`` steps; the result is deterministic."""
    return Simulation(scenario, controller, script).run()


def step_world(sim: Simulation) -> dict:
    return sim.step_world()


def witness_script(witness, controller: TimedAutomaton, dt: float) -> ControlScript:
    """Map a witness onto simulation steps.

    Delays are scheduled relative to the previous scripted step, so the lag
    introduced by "one edge per step" never shortens a later delay.  The script
    is released one step after the final witness state has been recorded.
    """
    tick = Fraction(str(dt)) / Fraction(str(controller.time_unit))
    obs = controller.observations
    entries = [ScriptEntry(0, None, dict(zip(obs, witness.initial_valuation)))]
    step = 0
    pending = Fraction(0)  # witness time since the last scheduled entry
    for s in witness.steps:
        pending += s.delay
        target = step + math.ceil(pending / tick)
        if s.kind == "edge":
            step = max(step + 1, target)
            entries.append(ScriptEntry(step, s.edge, dict(zip(obs, s.valuation))))
        else:
            step = target
            if entries[-1].step == step:
                last = entries.pop()
                entries.append(ScriptEntry(step, last.edge, dict(zip(obs, s.valuation))))
            else:
                entries.append(ScriptEntry(step, None, dict(zip(obs, s.valuation))))
        pending = Fraction(0)
    release = step + math.ceil((pending + witness.final_delay) / tick) + 1
    return ControlScript(tuple(entries), release)


__all__ = [
    "ACTIONS",
    "AgentSpec",
    "ControlScript",
    "Event",
    "ObservationSpec",
    "Observer",
    "PROCEED_CLASS",
    "STOP_CLASS",
    "Scenario",
    "ScenarioError",
    "ScriptEntry",
    "Simulation",
    "SimulationError",
    "Trace",
    "TraceError",
    "at_stop_line",
    "controller_digest",
    "load_scenario",
    "load_trace",
    "loads_scenario",
    "loads_trace",
    "run",
    "scenario_from_dict",
    "step_world",
    "witness_script",
]
