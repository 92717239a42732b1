"""Pairing formal verdicts with simulation evidence.

A property proved (or refuted) on the controller automaton is translated into
trace assertions; the assumptions the proof rests on become the axes of a
test campaign that probes their boundaries.  The outcome is a report with a
single status: ``corroborated``, ``refuted`` or ``inconclusive``.
"""
from __future__ import annotations

import copy
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
import yaml

from .assertions import (
    Assertion,
    ColumnEvaluator,
    TraceTable,
    check_suite,
    format_predicate,
    parse_assertions,
    parse_predicate,
)
from .assertions.predicates import And, Call, Cmp, Ident, Not, Num, Or, PredicateError, Str
from .automata import (
    ObservationEnvironment,
    SafetyProperty,
    TimedAutomaton,
    export_assumptions,
    reachability,
    replay_witness,
)
from .automata.model import BadAnd, BadAtom, BadNot, BadOr
from .simulator import (
    PROCEED_CLASS,
    STOP_CLASS,
    Scenario,
    ScenarioError,
    SimulationError,
    Trace,
    controller_digest,
    digest,
    q,
    run,
    scenario_from_dict,
    witness_script,
)

STRATEGIES = ("boundary", "sweep", "random")
STATUSES = ("corroborated", "refuted", "inconclusive")
UNREALIZABLE = "refuted-formally, unrealizable-in-simulation"


class BindingError(ValueError):
    pass


class CampaignError(ValueError):
    pass


# ------------------------------------------------------------------ binding


@dataclass(frozen=True)
class Demand:
    """While ``when`` holds, the property asks the ego to ``stop`` or ``proceed``."""

    when: object
    action: str

    def to_dict(self) -> dict:
        return {"when": format_predicate(self.when), "action": self.action}


@dataclass
class PropertyBinding:
    """A formal property together with its simulation counterpart."""

    name: str
    automaton: Optional[TimedAutomaton] = None
    property: Optional[SafetyProperty] = None
    environment: ObservationEnvironment = field(default_factory=ObservationEnvironment)
    bindings: dict = field(default_factory=dict)  # symbol -> predicate node
    extra: list = field(default_factory=list)  # additional Assertion objects
    demands: list = field(default_factory=list)
    campaign: Optional[dict] = None

    def validate(self) -> None:
        if self.property is None:
            return
        for a in _atoms(self.property.bad):
            if a.kind in ("seen", "obs") and a.name not in self.bindings:
                raise BindingError(f"binding {self.name}: observation {a.name!r} is not bound")

    def to_dict(self) -> dict:
        d = {"name": self.name, "bindings": {k: format_predicate(v) for k, v in self.bindings.items()}}
        if self.property is not None:
            d["property"] = self.property.to_dict()
        if self.extra:
            d["assertions"] = [a.to_dict() for a in self.extra]
        if self.demands:
            d["demands"] = [x.to_dict() for x in self.demands]
        return d


def _atoms(e):
    if isinstance(e, BadAtom):
        return [e]
    if isinstance(e, BadNot):
        return _atoms(e.arg)
    return _atoms(e.left) + _atoms(e.right)


def _binding_value(symbol: str, v) -> object:
    if isinstance(v, Mapping):
        if "usl" not in v:
            raise BindingError(f"binding for {symbol!r}: a mapping needs a 'usl' formula")
        h = float(v.get("horizon", 4.5))
        view = str(v.get("view", "ahead"))
        text = json.dumps(str(v["usl"]))
        return _parse(symbol, f"usl({text}, {h!r}, {json.dumps(view)})")
    if not isinstance(v, str):
        raise BindingError(f"binding for {symbol!r}: expected a predicate string or a usl mapping")
    return _parse(symbol, v)


def _parse(symbol: str, text: str):
    try:
        return parse_predicate(text)
    except PredicateError as exc:
        raise BindingError(f"binding for {symbol!r}: {exc}") from None


def binding_from_dict(
    d: Mapping,
    automaton: Optional[TimedAutomaton] = None,
    prop: Optional[SafetyProperty] = None,
    env: Optional[ObservationEnvironment] = None,
) -> PropertyBinding:
    extra_keys = set(d) - {"name", "property", "bindings", "assertions", "demands", "campaign"}
    if extra_keys:
        raise BindingError(f"binding: unknown section(s) {sorted(extra_keys)}")
    raw = d.get("bindings") or {}
    bindings = {str(k): _binding_value(str(k), v) for k, v in raw.items()}
    extra = []
    if d.get("assertions"):
        try:
            extra = parse_assertions(str(d["assertions"]))
        except ValueError as exc:
            raise BindingError(f"binding assertions: {exc}") from None
    demands = []
    for k, item in enumerate(d.get("demands") or ()):
        if not isinstance(item, Mapping) or "when" not in item or "action" not in item:
            raise BindingError(f"demands[{k}]: needs 'when' and 'action'")
        if item["action"] not in ("stop", "proceed"):
            raise BindingError(f"demands[{k}]: action must be 'stop' or 'proceed'")
        demands.append(Demand(_parse(f"demands[{k}]", str(item["when"])), str(item["action"])))
    # The formal artifact is attached only to the binding that names its
    # property; other files contribute demands and assertions alone.
    attach = prop is not None and d.get("property") == prop.name
    name = str(d.get("name") or d.get("property") or "binding")
    if not attach:
        automaton = prop = env = None
    b = PropertyBinding(name, automaton, prop, env or ObservationEnvironment(), bindings, extra, demands, d.get("campaign"))
    b.validate()
    return b


def load_binding(path, automaton=None, prop=None, env=None) -> PropertyBinding:
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(data, Mapping):
        raise BindingError("binding file must be a mapping")
    return binding_from_dict(data, automaton, prop, env)


# --------------------------------------------------------- derive assertions


def translate_bad(binding: PropertyBinding):
    """The bad predicate as a trace predicate (history atoms become ``once``)."""

    def loc(name):
        if name in binding.bindings:
            return binding.bindings[name]
        return Cmp("==", Call("location", ()), Str(name))

    def tr(e):
        if isinstance(e, BadAtom):
            if e.kind == "true":
                return Ident("true")
            if e.kind == "at":
                return loc(e.name)
            if e.kind == "visited":
                return Call("once", (loc(e.name),))
            if e.name not in binding.bindings:
                raise BindingError(f"binding {binding.name}: observation {e.name!r} is not bound")
            b = binding.bindings[e.name]
            return Call("once", (b,)) if e.kind == "seen" else b
        if isinstance(e, BadNot):
            return Not(tr(e.arg))
        if isinstance(e, BadAnd):
            return And(tr(e.left), tr(e.right))
        if isinstance(e, BadOr):
            return Or(tr(e.left), tr(e.right))
        raise TypeError(e)

    bad = tr(binding.property.bad)
    for c in binding.property.clock:
        bad = And(bad, _clock_as_dwell(binding, c))
    return bad


def _clock_as_dwell(binding: PropertyBinding, c):
    """A clock reset on every edge of a loop-free automaton measures the dwell time."""
    aut = binding.automaton
    name = binding.property.name
    if aut is None or c.other is not None:
        raise BindingError(f"property {name}: clock condition {c} has no trace counterpart")
    if any(c.clock not in e.resets or e.source == e.target for e in aut.edges):
        raise BindingError(f"property {name}: clock {c.clock!r} is not reset on every location change")
    op = "==" if c.op == "==" else c.op
    return Cmp(op, Call("dwell", ()), Num(float(q(c.value * aut.time_unit))))


def derive_assertions(binding: PropertyBinding, dt: float = 0.1) -> list[Assertion]:
    """``!bad`` as an invariant, step durations as post-conditions, plus any extra stanzas."""
    out: list[Assertion] = []
    if binding.property is not None:
        out.append(Assertion(f"{binding.property.name}_invariant", "invariant", Not(translate_bad(binding))))
    aut = binding.automaton
    if aut is not None:
        for b in aut.durations:
            entered = Cmp("==", Call("location", ()), Str(b.step))
            if b.max_duration is not None:
                cond = Or(Cmp("!=", Call("location", ()), Str(b.step)),
                          Cmp("<=", Call("dwell", ()), _num(b.max_duration + 1e-9)))
                out.append(Assertion(f"{b.step}_max_duration", "post", cond, entered, "temporal", q(b.max_duration + dt)))
            if b.min_duration > 0 and b.min_duration - dt > 1e-9:
                out.append(Assertion(f"{b.step}_min_duration", "post", entered, entered, "temporal", q(b.min_duration - dt)))
    names = {a.name for a in out}
    for a in binding.extra:
        if a.name in names:
            raise BindingError(f"extra assertion {a.name!r} clashes with a derived one")
        out.append(a)
    return out


def _num(v: float) -> Num:
    return Num(float(v))


# ----------------------------------------------------------------- campaign


@dataclass(frozen=True)
class Axis:
    assumption: str
    path: str
    lo: float
    hi: Optional[float]
    epsilon: float = 0.1
    offset: float = 0.0
    scale: float = 1.0
    valid: tuple = (0.0, None)

    def to_dict(self) -> dict:
        return {
            "assumption": self.assumption, "path": self.path, "range": [self.lo, self.hi],
            "epsilon": self.epsilon, "offset": self.offset, "scale": self.scale, "valid": list(self.valid),
        }

    def is_valid(self, v: float) -> bool:
        lo, hi = self.valid
        return (lo is None or v >= lo - 1e-12) and (hi is None or v <= hi + 1e-12)


@dataclass(frozen=True)
class Campaign:
    base: Scenario
    axes: tuple[Axis, ...]
    strategy: str = "boundary"
    trials: int = 6
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise CampaignError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.trials < 1:
            raise CampaignError("trials must be >= 1")
        for ax in self.axes:
            if not ax.epsilon > 0:
                raise CampaignError(f"axis {ax.assumption}: epsilon must be > 0")
            if ax.hi is not None and ax.hi < ax.lo:
                raise CampaignError(f"axis {ax.assumption}: empty range [{ax.lo}, {ax.hi}]")
            resolve_path(self.base.to_dict(), ax.path)

    def to_dict(self) -> dict:
        return {
            "scenario": self.base.name,
            "scenario_digest": self.base.digest(),
            "strategy": self.strategy,
            "trials": self.trials,
            "seed": self.seed,
            "axes": [a.to_dict() for a in self.axes],
        }


def _path_parts(path: str) -> list[str]:
    parts = path.split(".")
    if not all(parts):
        raise CampaignError(f"parameter path {path!r} is malformed")
    return parts


def _step(node, part: str, path: str):
    if isinstance(node, list):
        if part.isdigit() and int(part) < len(node):
            return node, int(part)
        for k, item in enumerate(node):
            if isinstance(item, Mapping) and (item.get("id") == part or item.get("agent") == part):
                return node, k
        raise CampaignError(f"parameter path {path!r} is missing: no element {part!r}")
    if isinstance(node, Mapping) and part in node:
        return node, part
    raise CampaignError(f"parameter path {path!r} is missing: no field {part!r}")


def resolve_path(d, path: str):
    node = d
    for part in _path_parts(path):
        parent, key = _step(node, part, path)
        node = parent[key]
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise CampaignError(f"parameter path {path!r} does not name a number")
    return node


def set_path(d, path: str, value: float):
    parts = _path_parts(path)
    node = d
    for part in parts[:-1]:
        parent, key = _step(node, part, path)
        node = parent[key]
    parent, key = _step(node, parts[-1], path)
    parent[key] = value


def axes_from(raw: Sequence[Mapping], assumptions, epsilon: Optional[float] = None) -> tuple[Axis, ...]:
    by_name = {a.name: a for a in assumptions}
    out = []
    for k, item in enumerate(raw or ()):
        where = f"campaign.axes[{k}]"
        for key in ("assumption", "path"):
            if key not in item:
                raise CampaignError(f"{where}: missing field {key!r}")
        name = str(item["assumption"])
        if "range" in item:
            lo, hi = item["range"]
            lo = float(lo)
            hi = None if hi is None else float(hi)
        elif name in by_name:
            lo, hi = by_name[name].verified_range()
            hi = None if math.isinf(hi) else hi
            if "upper" in item:
                hi = float(item["upper"])
        else:
            raise CampaignError(f"{where}: assumption {name!r} is not exported by the controller and no range is given")
        valid = tuple(item.get("valid", (0.0, None)))
        out.append(
            Axis(name, str(item["path"]), lo, hi,
                 float(epsilon if epsilon is not None else item.get("epsilon", 0.1)),
                 float(item.get("offset", 0.0)), float(item.get("scale", 1.0)),
                 (None if valid[0] is None else float(valid[0]), None if valid[1] is None else float(valid[1])))
        )
    return tuple(out)


@dataclass(frozen=True)
class Trial:
    index: int
    parameters: dict  # assumption -> value
    labels: dict  # assumption -> boundary label
    scenario: Scenario

    @property
    def id(self) -> str:
        return f"trial-{self.index:03d}"


def boundary_points(ax: Axis) -> list[tuple[float, str]]:
    e = ax.epsilon
    cands = [(ax.lo - e, "lo-eps"), (ax.lo, "lo"), (ax.lo + e, "lo+eps")]
    if ax.hi is not None:
        cands += [(ax.hi - e, "hi-eps"), (ax.hi, "hi"), (ax.hi + e, "hi+eps")]
    out, seen = [], set()
    for v, label in cands:
        v = q(v)
        if v in seen or not ax.is_valid(v):
            continue
        seen.add(v)
        out.append((v, label))
    return out


def pairwise(levels: Sequence[Sequence]) -> list[tuple]:
    """Greedy covering array: every value pair of every two axes appears at least once."""
    if len(levels) <= 2:
        return list(itertools.product(*levels))
    rows = [list(r) for r in itertools.product(levels[0], levels[1])]
    for j in range(2, len(levels)):
        uncovered = {(i, a, b) for i in range(j) for a in range(len(levels[i])) for b in range(len(levels[j]))}
        idx_rows = []
        for r in rows:
            ridx = [levels[i].index(r[i]) for i in range(j)]
            best, best_cov = 0, -1
            for b in range(len(levels[j])):
                cov = sum((i, ridx[i], b) in uncovered for i in range(j))
                if cov > best_cov:
                    best, best_cov = b, cov
            for i in range(j):
                uncovered.discard((i, ridx[i], best))
            r.append(levels[j][best])
            idx_rows.append(ridx + [best])
        while uncovered:
            i0, a0, b0 = min(uncovered)
            new = [None] * (j + 1)
            new[i0], new[j] = a0, b0
            for i in range(j):
                if new[i] is None:
                    cands = [a for a in range(len(levels[i])) if (i, a, b0) in uncovered]
                    new[i] = cands[0] if cands else 0
            for i in range(j):
                uncovered.discard((i, new[i], b0))
            rows.append([levels[i][new[i]] for i in range(j + 1)])
    return [tuple(r) for r in rows]


def generate_boundary_scenarios(campaign: Campaign) -> list[Trial]:
    """Scenarios at the boundaries (or a sweep / random sample) of the verified ranges."""
    axes = campaign.axes
    if not axes:
        raise CampaignError("campaign has no axes")
    if campaign.strategy == "boundary":
        levels = [boundary_points(ax) for ax in axes]
        for ax, lv in zip(axes, levels):
            if not lv:
                raise CampaignError(f"axis {ax.assumption}: no physically valid boundary value")
        combos = pairwise(levels)
    elif campaign.strategy == "sweep":
        levels = []
        for ax in axes:
            if ax.hi is None:
                raise CampaignError(f"axis {ax.assumption}: a sweep needs a finite range")
            lv = [(q(v), "sweep") for v in np.linspace(ax.lo, ax.hi, campaign.trials) if ax.is_valid(q(v))]
            if not lv:
                raise CampaignError(f"axis {ax.assumption}: empty valid set")
            levels.append(lv)
        combos = pairwise(levels)
    else:
        rng = np.random.default_rng(campaign.seed)
        combos = []
        for _ in range(campaign.trials):
            row = []
            for ax in axes:
                if ax.hi is None:
                    raise CampaignError(f"axis {ax.assumption}: random sampling needs a finite range")
                row.append((q(float(rng.uniform(ax.lo, ax.hi))), "random"))
            combos.append(tuple(row))
    trials = []
    base = campaign.base.to_dict()
    for combo in combos:
        d = copy.deepcopy(base)
        params, labels = {}, {}
        for ax, (v, label) in zip(axes, combo):
            set_path(d, ax.path, q(ax.offset + ax.scale * v))
            params[ax.assumption] = v
            labels[ax.assumption] = label
        d["name"] = f"{campaign.base.name}-{len(trials):03d}"
        try:
            sc = scenario_from_dict(d)
        except ScenarioError as exc:
            # Physically impossible parameter combination: skip it.
            if campaign.strategy == "boundary":
                continue
            raise CampaignError(f"generated scenario invalid: {exc}") from None
        trials.append(Trial(len(trials), params, labels, sc))
    if not trials:
        raise CampaignError("campaign produced no valid scenario")
    return trials


# ------------------------------------------------------------------- running


@dataclass
class TrialOutcome:
    trial: Trial
    verdict: str  # pass | fail | vacuous | error
    results: list = field(default_factory=list)
    error: Optional[str] = None
    trace: Optional[Trace] = None
    runtime: float = 0.0

    def failing(self) -> list:
        return [r for r in self.results if r.verdict == "fail"]


def _trial_verdict(results) -> str:
    if any(r.verdict == "fail" for r in results):
        return "fail"
    triggered = [r for r in results if r.kind != "invariant"]
    if triggered and all(r.verdict == "vacuous" for r in triggered):
        return "vacuous"
    return "pass"


def _run_trial(args) -> TrialOutcome:
    trial, controller, assertions = args
    t0 = time.perf_counter()
    try:
        trace = run(trial.scenario, controller)
    except SimulationError as exc:
        return TrialOutcome(trial, "error", error=str(exc), runtime=time.perf_counter() - t0)
    suite = check_suite(trace, assertions)
    if suite.errors:
        msg = "; ".join(f"{e['name']}: {e['error']}" for e in suite.errors)
        return TrialOutcome(trial, "error", suite.results, msg, trace, time.perf_counter() - t0)
    return TrialOutcome(trial, _trial_verdict(suite.results), suite.results, None, trace, time.perf_counter() - t0)


@dataclass
class ConflictFinding:
    trial: str
    properties: tuple[str, str]
    demands: tuple[str, str]
    steps: list[int]
    actions: list[str]
    obeyed: list[Optional[str]]  # property whose demand the recorded action met

    def to_dict(self) -> dict:
        return {
            "trial": self.trial,
            "properties": list(self.properties),
            "demands": list(self.demands),
            "steps": self.steps,
            "actions": self.actions,
            "obeyed": self.obeyed,
        }


_CLASS = {"stop": STOP_CLASS, "proceed": PROCEED_CLASS}


def detect_conflicts(bindings: Sequence[PropertyBinding], trials) -> list[ConflictFinding]:
    """Steps where two properties ask for opposite action classes.

    ``trials`` holds (trial id, trace) pairs.  The action the controller
    actually took is read from the trace and reported next to each step.
    """
    if len(bindings) < 2:
        return []
    out = []
    for tid, trace in trials:
        if trace is None:
            continue
        ev = ColumnEvaluator(TraceTable(trace))
        cols = []
        for b in bindings:
            for d in b.demands:
                cols.append((b.name, d, ev(d.when)))
        for (n1, d1, c1), (n2, d2, c2) in itertools.combinations(cols, 2):
            if n1 == n2 or d1.action == d2.action:
                continue
            both = np.flatnonzero(c1 & c2)
            if both.size:
                actions = [trace.steps[int(k)]["action"] for k in both]
                obeyed = [n1 if a in _CLASS[d1.action] else n2 if a in _CLASS[d2.action] else None for a in actions]
                out.append(ConflictFinding(tid, (n1, n2), (d1.action, d2.action), [int(k) for k in both], actions, obeyed))
    return out


@dataclass
class CorroborationReport:
    run_id: str
    binding: PropertyBinding
    campaign: Campaign
    controller: TimedAutomaton
    formal: Optional[object]
    assumptions: list
    assertions: list
    outcomes: list
    conflicts: list
    witness: Optional[dict]
    status: str
    reasons: list
    runtime: float = 0.0

    def counterexamples(self) -> list[dict]:
        out = []
        for o in self.outcomes:
            for r in o.failing():
                f = r.failures[0]
                out.append({
                    "trial": o.trial.id,
                    "trace": f"traces/{o.trial.id}.jsonl",
                    "assertion": r.name,
                    "step": f.step,
                    "parameters": o.trial.parameters,
                })
        if self.witness and self.witness.get("realized"):
            out.insert(0, {"trial": "witness", "trace": "traces/witness.jsonl",
                           "assertion": self.witness["failing"][0], "step": self.witness["step"], "parameters": {}})
        return out

    def vacuity(self) -> list[dict]:
        out = []
        for o in self.outcomes:
            holes = [r.name for r in o.results if r.verdict == "vacuous"]
            if holes:
                out.append({"trial": o.trial.id, "parameters": o.trial.parameters,
                            "labels": o.trial.labels, "vacuous": holes, "trial_vacuous": o.verdict == "vacuous"})
        return out

    def to_dict(self) -> dict:
        b = self.binding
        return {
            "run_id": self.run_id,
            "property": b.property.name if b.property else b.name,
            "status": self.status,
            "reasons": self.reasons,
            "controller": {"name": self.controller.name, "digest": controller_digest(self.controller)},
            "formal": None if self.formal is None else {
                "verdict": self.formal.label,
                "explored": self.formal.explored,
                "stored": self.formal.stored,
                "witness": None if self.formal.witness is None else {
                    "file": "witness.json",
                    "replay": self.witness,
                },
            },
            "assumptions": [a.to_dict() for a in self.assumptions],
            "assertions": [a.to_dict() for a in self.assertions],
            "campaign": self.campaign.to_dict(),
            "trials": [
                {
                    "id": o.trial.id,
                    "parameters": o.trial.parameters,
                    "labels": o.trial.labels,
                    "scenario": f"scenarios/{o.trial.id}.scn",
                    "scenario_digest": o.trial.scenario.digest(),
                    "trace": None if o.trace is None else f"traces/{o.trial.id}.jsonl",
                    "trace_digest": None if o.trace is None else o.trace.digest(),
                    "verdict": o.verdict,
                    "error": o.error,
                    "assertions": {r.name: r.verdict for r in o.results},
                    "failures": {r.name: [f.step for f in r.failures[:10]] for r in o.failing()},
                    "runtime_s": round(o.runtime, 3),
                }
                for o in self.outcomes
            ],
            "counterexamples": self.counterexamples(),
            "vacuity": self.vacuity(),
            "conflicts": [c.to_dict() for c in self.conflicts],
            "runtime_s": round(self.runtime, 3),
        }


def _decide(formal, outcomes, witness) -> tuple[str, list[str]]:
    reasons = []
    fails = [o for o in outcomes if o.verdict == "fail"]
    if fails:
        reasons.append(f"{len(fails)} trial(s) violate derived assertions: " + ", ".join(o.trial.id for o in fails))
    if formal is not None and not formal.safe:
        if witness and witness.get("realized"):
            reasons.append("formal witness replays as a failing simulation")
        else:
            reasons.append(UNREALIZABLE)
    if fails or (witness and witness.get("realized")):
        if formal is not None and formal.safe:
            reasons.append("divergence: formal verdict Safe but simulation found a counterexample")
        return "refuted", reasons
    errors = [o for o in outcomes if o.verdict == "error"]
    if errors:
        reasons.append(f"{len(errors)} trial(s) could not be evaluated: " + ", ".join(o.trial.id for o in errors))
    vac = [o for o in outcomes if o.verdict == "vacuous"]
    if vac:
        reasons.append("vacuous boundary point(s): " + ", ".join(o.trial.id for o in vac))
    if formal is None:
        reasons.append("no formal verdict")
    if formal is not None and formal.safe and not errors and not vac:
        reasons.insert(0, f"formal Safe and all {len(outcomes)} boundary trial(s) non-vacuous and passing")
        return "corroborated", reasons
    return "inconclusive", reasons


def _replay_witness(binding, controller, base: Scenario, assertions, formal) -> Optional[dict]:
    if formal is None or formal.safe:
        return None
    ok = replay_witness(controller, binding.property, formal.witness, binding.environment)
    script = witness_script(formal.witness, controller, base.dt)
    try:
        trace = run(base, controller, script)
    except SimulationError as exc:
        return {"formal_replay": ok, "realized": False, "error": str(exc), "trace": None, "failing": [], "step": None}
    suite = check_suite(trace, assertions)
    failing = [r for r in suite.results if r.verdict == "fail"]
    return {
        "formal_replay": ok,
        "realized": bool(failing),
        "trace": "traces/witness.jsonl",
        "trace_digest": trace.digest(),
        "failing": [r.name for r in failing],
        "step": failing[0].failures[0].step if failing else None,
        "_trace": trace,
    }


def run_campaign(
    binding: PropertyBinding,
    campaign: Campaign,
    others: Sequence[PropertyBinding] = (),
    workers: int = 1,
    formal=None,
) -> CorroborationReport:
    """Model-check (unless given a verdict), simulate every trial, decide the status."""
    t0 = time.perf_counter()
    controller = binding.automaton
    if controller is None or binding.property is None:
        raise BindingError("run_campaign needs a binding with a controller and a property")
    if formal is None:
        formal = reachability(controller, binding.property, binding.environment)
    assumptions = export_assumptions(controller, binding.property, binding.environment)
    assertions = derive_assertions(binding, campaign.base.dt)
    trials = generate_boundary_scenarios(campaign)
    jobs = [(t, controller, assertions) for t in trials]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_trial, jobs))
    else:
        outcomes = [_run_trial(j) for j in jobs]
    witness = _replay_witness(binding, controller, campaign.base, assertions, formal)
    conflicts = detect_conflicts([binding, *others], [(o.trial.id, o.trace) for o in outcomes])
    status, reasons = _decide(formal, outcomes, witness)
    if conflicts:
        reasons.append(f"{len(conflicts)} conflict finding(s) between properties (reported, not adjudicated)")
    run_id = digest({
        "scenario": campaign.base.digest(),
        "controller": controller_digest(controller),
        "binding": binding.to_dict(),
        "campaign": campaign.to_dict(),
        "others": [b.to_dict() for b in others],
    })[:16]
    return CorroborationReport(
        run_id, binding, campaign, controller, formal, assumptions, assertions, outcomes, conflicts,
        witness, status, reasons, time.perf_counter() - t0,
    )


# ------------------------------------------------------------------ reports


def _public_witness(w: Optional[dict]) -> Optional[dict]:
    if w is None:
        return None
    return {k: v for k, v in w.items() if not k.startswith("_")}


def render_report(report: CorroborationReport, fmt: str = "json") -> str:
    if not report.outcomes:
        raise CampaignError("nothing to report: the campaign has no trials")
    d = report.to_dict()
    if d["formal"] and d["formal"]["witness"]:
        d["formal"]["witness"]["replay"] = _public_witness(report.witness)
    if fmt == "json":
        return json.dumps(d, indent=2) + "\n"
    if fmt not in ("md", "markdown", "text"):
        raise ValueError(f"unknown report format {fmt!r}")
    lines = [f"# Corroboration report `{d['run_id']}`", ""]
    lines.append(f"**Status: {d['status']}** ({d['property']}, controller `{d['controller']['name']}`)")
    lines.append("")
    for r in d["reasons"]:
        lines.append(f"- {r}")
    lines.append("")
    if d["counterexamples"]:
        lines += ["## Counterexamples", "", "| trial | assertion | step | trace |", "|---|---|---|---|"]
        for c in d["counterexamples"]:
            lines.append(f"| {c['trial']} | {c['assertion']} | {c['step']} | {c['trace']} |")
        lines.append("")
    lines += ["## Formal verdict", ""]
    if d["formal"]:
        lines.append(f"{d['formal']['verdict']} ({d['formal']['explored']} symbolic states explored)")
        w = d["formal"]["witness"]
        if w:
            rep = w["replay"] or {}
            lines.append("")
            lines.append(f"Witness: `{w['file']}`; replays on the automaton: {rep.get('formal_replay')}; "
                         f"realized in simulation: {rep.get('realized')} ({rep.get('trace')})")
    lines += ["", "## Assumptions", "", "| name | value | relation | source |", "|---|---|---|---|"]
    for a in d["assumptions"]:
        lines.append(f"| {a['name']} | {a['value']} | {a['relation']} | {a['source']} |")
    lines += ["", "## Trials", ""]
    axes = [ax["assumption"] for ax in d["campaign"]["axes"]]
    names = [a["name"] for a in d["assertions"]]
    lines.append("| trial | " + " | ".join(axes) + " | verdict | " + " | ".join(names) + " | trace digest |")
    lines.append("|" + "---|" * (3 + len(axes) + len(names)))
    for t in d["trials"]:
        vals = [f"{t['parameters'][a]:g} ({t['labels'][a]})" for a in axes]
        verd = [t["assertions"].get(n, "-") for n in names]
        dig = (t["trace_digest"] or "")[:12]
        lines.append(f"| [{t['id']}]({t['scenario']}) | " + " | ".join(vals) + f" | {t['verdict']} | "
                     + " | ".join(verd) + f" | {dig} |")
    if d["vacuity"]:
        lines += ["", "## Vacuity", ""]
        for v in d["vacuity"]:
            lines.append(f"- {v['trial']}: never triggered: {', '.join(v['vacuous'])}")
    if d["conflicts"]:
        lines += ["", "## Conflicts", ""]
        for c in d["conflicts"]:
            lines.append(f"- {c['trial']}: {c['properties'][0]} demands {c['demands'][0]}, "
                         f"{c['properties'][1]} demands {c['demands'][1]} at steps {c['steps'][0]}..{c['steps'][-1]} "
                         f"({len(c['steps'])} steps)")
    lines += ["", f"Campaign: strategy {d['campaign']['strategy']}, seed {d['campaign']['seed']}, "
              f"{len(d['trials'])} trial(s), {d['runtime_s']} s", ""]
    return "\n".join(lines)


def write_report(report: CorroborationReport, out_dir) -> Path:
    """Write report.json, report.md, scenarios/*.scn and traces/*.jsonl."""
    out = Path(out_dir)
    (out / "scenarios").mkdir(parents=True, exist_ok=True)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    for o in report.outcomes:
        (out / "scenarios" / f"{o.trial.id}.scn").write_text(o.trial.scenario.dumps(), encoding="utf-8")
        if o.trace is not None:
            o.trace.save(out / "traces" / f"{o.trial.id}.jsonl")
    if report.formal is not None and report.formal.witness is not None:
        (out / "witness.json").write_text(
            json.dumps(report.formal.to_dict(report.controller), indent=2) + "\n", encoding="utf-8")
        (out / "scenarios" / "witness.scn").write_text(report.campaign.base.dumps(), encoding="utf-8")
        w = report.witness or {}
        if w.get("_trace") is not None:
            w["_trace"].save(out / "traces" / "witness.jsonl")
    (out / "report.json").write_text(render_report(report, "json"), encoding="utf-8")
    (out / "report.md").write_text(render_report(report, "md"), encoding="utf-8")
    return out


def campaign_from_binding(
    binding: PropertyBinding,
    base: Scenario,
    strategy: Optional[str] = None,
    epsilon: Optional[float] = None,
    trials: Optional[int] = None,
    seed: Optional[int] = None,
) -> Campaign:
    spec = binding.campaign or {}
    assumptions = export_assumptions(binding.automaton, binding.property, binding.environment) if binding.automaton else []
    axes = axes_from(spec.get("axes") or (), assumptions, epsilon)
    return Campaign(
        base,
        axes,
        strategy or str(spec.get("strategy", "boundary")),
        int(trials if trials is not None else spec.get("trials", 6)),
        int(seed if seed is not None else spec.get("seed", base.seed)),
    )


__all__ = [
    "Axis",
    "BindingError",
    "Campaign",
    "CampaignError",
    "ConflictFinding",
    "CorroborationReport",
    "Demand",
    "PropertyBinding",
    "Trial",
    "TrialOutcome",
    "UNREALIZABLE",
    "binding_from_dict",
    "boundary_points",
    "campaign_from_binding",
    "derive_assertions",
    "detect_conflicts",
    "generate_boundary_scenarios",
    "load_binding",
    "pairwise",
    "render_report",
    "run_campaign",
    "translate_bad",
    "write_report",
]
