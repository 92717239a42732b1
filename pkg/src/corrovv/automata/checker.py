"""Zone-graph reachability for safety properties of timed automata."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from . import dbm
from .dbm import Zone
from .model import (
    BadAnd,
    BadAtom,
    BadExpr,
    BadNot,
    BadOr,
    ModelError,
    ObservationEnvironment,
    SafetyProperty,
    TimedAutomaton,
)


@dataclass(frozen=True)
class WitnessStep:
    """``delay`` time units pass, then an edge fires or observations change."""

    kind: str  # "edge" | "observe"
    delay: Fraction
    edge: Optional[int]
    location: str
    valuation: tuple[bool, ...]
    clocks: tuple[Fraction, ...]  # after the step
    zone: str = ""


@dataclass(frozen=True)
class Witness:
    initial_location: str
    initial_valuation: tuple[bool, ...]
    steps: tuple[WitnessStep, ...]
    final_delay: Fraction
    final_clocks: tuple[Fraction, ...]

    def edge_count(self) -> int:
        return sum(1 for s in self.steps if s.kind == "edge")

    def to_dict(self, automaton: TimedAutomaton) -> dict:
        obs = automaton.observations

        def val(v):
            return {o: b for o, b in zip(obs, v)}

        steps = []
        for s in self.steps:
            item = {
                "kind": s.kind,
                "delay": str(s.delay),
                "delay_s": float(s.delay) * automaton.time_unit,
                "location": s.location,
                "observations": val(s.valuation),
                "clocks": {c: str(x) for c, x in zip(automaton.clocks, s.clocks)},
            }
            if s.edge is not None:
                e = automaton.edges[s.edge]
                item["edge"] = {"index": s.edge, "source": e.source, "target": e.target, "action": e.action}
            if s.zone:
                item["zone"] = s.zone
            steps.append(item)
        return {
            "initial_location": self.initial_location,
            "initial_observations": val(self.initial_valuation),
            "steps": steps,
            "final_delay": str(self.final_delay),
            "final_clocks": {c: str(x) for c, x in zip(automaton.clocks, self.final_clocks)},
        }


@dataclass
class Verdict:
    safe: bool
    property: str
    witness: Optional[Witness] = None
    explored: int = 0
    stored: int = 0

    @property
    def label(self) -> str:
        return "Safe" if self.safe else "Unsafe"

    def to_dict(self, automaton: TimedAutomaton) -> dict:
        d = {
            "property": self.property,
            "automaton": automaton.name,
            "verdict": self.label,
            "explored": self.explored,
            "stored": self.stored,
        }
        if self.witness is not None:
            d["witness"] = self.witness.to_dict(automaton)
        return d


# ------------------------------------------------------------------ helpers


class _Compiled:
    """Automaton pre-translated to DBM constraints."""

    def __init__(self, aut: TimedAutomaton, prop: SafetyProperty, env: ObservationEnvironment):
        self.aut = aut
        self.prop = prop
        self.env = env
        self.index = aut.clock_index()
        self.n = len(aut.clocks)
        self.loc_names = [loc.name for loc in aut.locations]
        self.inv = {loc.name: [c for cc in loc.invariant for c in cc.to_dbm(self.index)] for loc in aut.locations}
        self.guards = [[c for cc in e.guard for c in cc.to_dbm(self.index)] for e in aut.edges]
        self.resets = [[self.index[x] for x in e.resets] for e in aut.edges]
        self.obs_pos = {o: k for k, o in enumerate(aut.observations)}
        self.edge_obs = [[(self.obs_pos[o], v) for o, v in e.observe] for e in aut.edges]
        self.out = {name: [k for k, e in enumerate(aut.edges) if e.source == name] for name in self.loc_names}
        self.bad_clock = [c for cc in prop.clock for c in cc.to_dbm(self.index)]
        self.hist = prop.history_atoms()
        k = aut.max_constant()
        k = max([k] + [abs(c.value) for c in prop.clock])
        self.k = k
        diag = []
        for cs in list(self.inv.values()) + self.guards + [self.bad_clock]:
            for c in cs:
                if c.diagonal:
                    # Split along the non-strict/strict pair consistently.
                    key = c if c.i < c.j else c.negated()
                    if key not in diag:
                        diag.append(key)
        self.diagonals = diag
        self.allowed = {name: env.allowed(aut, name) for name in self.loc_names}

    def update_hist(self, hist: tuple[bool, ...], loc: str, val: tuple[bool, ...]) -> tuple[bool, ...]:
        out = []
        for h, a in zip(hist, self.hist):
            if a.kind == "visited":
                out.append(h or loc == a.name)
            else:
                out.append(h or val[self.obs_pos[a.name]])
        return tuple(out)

    def bad_discrete(self, loc: str, val: tuple[bool, ...], hist: tuple[bool, ...]) -> bool:
        hmap = dict(zip(self.hist, hist))

        def ev(e: BadExpr) -> bool:
            if isinstance(e, BadAtom):
                if e.kind == "true":
                    return True
                if e.kind == "at":
                    return loc == e.name
                if e.kind == "obs":
                    return val[self.obs_pos[e.name]]
                return hmap[e]
            if isinstance(e, BadNot):
                return not ev(e.arg)
            if isinstance(e, BadAnd):
                return ev(e.left) and ev(e.right)
            if isinstance(e, BadOr):
                return ev(e.left) or ev(e.right)
            raise TypeError(e)

        return ev(self.prop.bad)

    def initial_zone(self) -> Zone:
        z = Zone.zero(self.n)
        z = dbm.intersect_all(z, self.inv[self.aut.initial])
        return dbm.intersect_all(dbm.up(z), self.inv[self.aut.initial])

    def post(self, z: Zone, e: int) -> Zone:
        tgt = self.aut.edges[e].target
        z = dbm.intersect_all(z, self.guards[e])
        if z.is_empty():
            return z
        z = dbm.reset(z, self.resets[e])
        z = dbm.intersect_all(z, self.inv[tgt])
        if z.is_empty():
            return z
        return dbm.intersect_all(dbm.up(z), self.inv[tgt])

    def normalize(self, z: Zone) -> list[Zone]:
        return dbm.split_normalize(z, self.k, self.diagonals)


@dataclass
class _Node:
    loc: str
    val: tuple[bool, ...]
    hist: tuple[bool, ...]
    zone: Zone
    parent: Optional[int]
    kind: str  # "init" | "edge" | "observe"
    edge: Optional[int] = None


# ------------------------------------------------------------- reachability


def reachability(
    automaton: TimedAutomaton,
    prop: SafetyProperty,
    env: Optional[ObservationEnvironment] = None,
) -> Verdict:
    """Decide whether ``prop.bad`` is reachable.

    Breadth-first over (location, observations, history, zone) nodes with
    zone-inclusion subsumption; observation changes cost no edge, so the
    first witness found fires a minimal number of edges.
    """
    env = env or ObservationEnvironment()
    prop.validate(automaton)
    env.validate(automaton)
    C = _Compiled(automaton, prop, env)
    nodes: list[_Node] = []
    passed: dict[tuple, list[Zone]] = {}
    queue: deque[int] = deque()
    explored = 0

    def add(node: _Node, front: bool) -> Optional[int]:
        key = (node.loc, node.val, node.hist)
        bucket = passed.setdefault(key, [])
        if any(z.includes(node.zone) for z in bucket):
            return None
        bucket[:] = [z for z in bucket if not node.zone.includes(z)]
        bucket.append(node.zone)
        nodes.append(node)
        idx = len(nodes) - 1
        if front:
            queue.appendleft(idx)
        else:
            queue.append(idx)
        return idx

    def is_bad(node: _Node) -> bool:
        if not C.bad_discrete(node.loc, node.val, node.hist):
            return False
        return not dbm.intersect_all(node.zone, C.bad_clock).is_empty()

    def found(idx: int) -> Verdict:
        w = _build_witness(C, nodes, idx)
        return Verdict(False, prop.name, w, explored, len(nodes))

    z0 = C.initial_zone()
    hist0 = tuple(False for _ in C.hist)
    if not z0.is_empty():
        for val in C.allowed[automaton.initial]:
            for z in C.normalize(z0):
                node = _Node(automaton.initial, val, C.update_hist(hist0, automaton.initial, val), z, None, "init")
                idx = add(node, False)
                if idx is not None and is_bad(node):
                    return found(idx)

    while queue:
        idx = queue.popleft()
        cur = nodes[idx]
        explored += 1
        for e in C.out[cur.loc]:
            if any(cur.val[p] != v for p, v in C.edge_obs[e]):
                continue
            z = C.post(cur.zone, e)
            if z.is_empty():
                continue
            tgt = automaton.edges[e].target
            vals = [cur.val] if cur.val in C.allowed[tgt] else C.allowed[tgt]
            for val in vals:
                hist = C.update_hist(cur.hist, tgt, val)
                for zz in C.normalize(z):
                    node = _Node(tgt, val, hist, zz, idx, "edge", e)
                    nid = add(node, False)
                    if nid is not None and is_bad(node):
                        return found(nid)
        for val in C.allowed[cur.loc]:
            if val == cur.val:
                continue
            node = _Node(cur.loc, val, C.update_hist(cur.hist, cur.loc, val), cur.zone, idx, "observe")
            nid = add(node, True)
            if nid is not None and is_bad(node):
                return found(nid)
    return Verdict(True, prop.name, None, explored, len(nodes))


# ----------------------------------------------------------------- witness


def _pick_delay(v: Sequence[Fraction], z: Zone) -> Fraction:
    """Some d >= 0 with v + d inside ``z`` (v must lie in the past of z)."""
    lo, lo_strict = Fraction(0), False
    hi, hi_strict = None, False
    for x in range(1, z.dim):
        b = z.m[x][0]
        if b != dbm.INF:
            c = Fraction(dbm.bound_value(b)) - v[x - 1]
            s = dbm.is_strict(b)
            if hi is None or c < hi or (c == hi and s):
                hi, hi_strict = c, s
        b = z.m[0][x]
        if b != dbm.INF:
            c = -Fraction(dbm.bound_value(b)) - v[x - 1]
            s = dbm.is_strict(b)
            if c > lo or (c == lo and s):
                lo, lo_strict = c, s
    if not lo_strict and (hi is None or lo < hi or (lo == hi and not hi_strict)):
        d = lo
    elif hi is None:
        d = lo + Fraction(1, 2)
    else:
        d = (lo + hi) / 2
    if hi is not None and (d > hi or (d == hi and hi_strict)):
        raise RuntimeError("witness concretization failed: no admissible delay")
    return d


def _build_witness(C: _Compiled, nodes: list[_Node], idx: int) -> Witness:
    chain = []
    while idx is not None:
        chain.append(nodes[idx])
        idx = nodes[idx].parent
    chain.reverse()
    edges = [n.edge for n in chain if n.kind == "edge"]
    aut = C.aut
    # Exact (un-normalized) zones along the path, then refine backwards.
    S = [C.initial_zone()]
    for e in edges:
        S.append(C.post(S[-1], e))
    T = [None] * len(S)
    T[-1] = dbm.intersect_all(S[-1], C.bad_clock)
    for i in range(len(edges), 0, -1):
        e = edges[i - 1]
        tgt = aut.edges[e].target
        R = C.resets[e]
        P = dbm.down(T[i])
        P = dbm.canonicalize(P)
        P = dbm.intersect_all(P, C.inv[tgt])
        for x in R:
            P = dbm.intersect_all(P, [dbm.Constraint(x, 0, dbm.bound(0)), dbm.Constraint(0, x, dbm.bound(0))])
        E = dbm.intersect_all(S[i - 1], C.guards[e])
        E = dbm.intersect_all(E, _as_constraints(dbm.free(P, R)))
        T[i - 1] = E
    if any(t.is_empty() for t in T):
        raise RuntimeError("witness path is spurious; normalization unsound for this model")

    v = [Fraction(0)] * C.n
    steps: list[WitnessStep] = []
    edge_i = 0
    pending = Fraction(0)
    for node in chain[1:]:
        if node.kind == "observe":
            steps.append(WitnessStep("observe", Fraction(0), None, node.loc, node.val, tuple(v)))
            continue
        d = _pick_delay(v, T[edge_i])
        v = [x + d for x in v]
        for x in C.resets[node.edge]:
            v[x - 1] = Fraction(0)
        edge_i += 1
        steps.append(WitnessStep("edge", d + pending, node.edge, node.loc, node.val, tuple(v), str(S[edge_i])))
    final = _pick_delay(v, T[-1])
    v = [x + final for x in v]
    return Witness(chain[0].loc, chain[0].val, tuple(steps), final, tuple(v))


def _as_constraints(z: Zone) -> list[dbm.Constraint]:
    out = []
    for i in range(z.dim):
        for j in range(z.dim):
            if i != j and z.m[i][j] != dbm.INF:
                out.append(dbm.Constraint(i, j, z.m[i][j]))
    if z.is_empty():
        out.append(dbm.Constraint(0, 0, dbm.bound(-1)))
    return out


def replay_witness(
    automaton: TimedAutomaton,
    prop: SafetyProperty,
    witness: Witness,
    env: Optional[ObservationEnvironment] = None,
) -> bool:
    """Run the witness on the concrete timed semantics.

    Checks invariants before and after each delay, guards and observation
    guards of each edge, environment admissibility, and that the run ends
    in the bad predicate.
    """
    env = env or ObservationEnvironment()
    C = _Compiled(automaton, prop, env)
    clocks = {c: Fraction(0) for c in automaton.clocks}
    loc = witness.initial_location
    val = tuple(witness.initial_valuation)
    if loc != automaton.initial or val not in C.allowed[loc]:
        return False
    hist = C.update_hist(tuple(False for _ in C.hist), loc, val)

    def inv_ok(name):
        return all(c.holds(clocks) for c in automaton.location(name).invariant)

    if not inv_ok(loc):
        return False
    for s in witness.steps:
        if s.delay < 0:
            return False
        for c in clocks:
            clocks[c] += s.delay
        if not inv_ok(loc):
            return False
        if s.kind == "observe":
            if s.valuation not in C.allowed[loc]:
                return False
            val = s.valuation
        else:
            e = automaton.edges[s.edge]
            if e.source != loc:
                return False
            if not all(c.holds(clocks) for c in e.guard):
                return False
            if any(val[C.obs_pos[o]] != b for o, b in e.observe):
                return False
            for x in e.resets:
                clocks[x] = Fraction(0)
            loc = e.target
            if not inv_ok(loc):
                return False
            if s.valuation != val:
                if s.valuation not in C.allowed[loc]:
                    return False
                val = s.valuation
            elif val not in C.allowed[loc]:
                return False
        hist = C.update_hist(hist, loc, val)
    if witness.final_delay < 0:
        return False
    for c in clocks:
        clocks[c] += witness.final_delay
    if not inv_ok(loc):
        return False
    if not C.bad_discrete(loc, val, hist):
        return False
    return all(c.holds(clocks) for c in prop.clock)


# -------------------------------------------------------------- assumptions


@dataclass(frozen=True)
class Assumption:
    """An axiom a formal verdict rests on, with the range it was verified at."""

    name: str
    value: object
    relation: str
    source: str
    unit: str = ""

    def verified_range(self) -> tuple[float, float]:
        if isinstance(self.value, (list, tuple)) and len(self.value) == 2:
            lo, hi = self.value
            return float(lo), float("inf") if hi is None else float(hi)
        if isinstance(self.value, (int, float)):
            v = float(self.value)
            if self.relation in (">=", ">"):
                return v, float("inf")
            if self.relation in ("<=", "<"):
                return 0.0, v
            return v, v
        raise ValueError(f"assumption {self.name} has no numeric range")

    def to_dict(self) -> dict:
        v = list(self.value) if isinstance(self.value, tuple) else self.value
        return {"name": self.name, "value": v, "relation": self.relation, "source": self.source, "unit": self.unit}


def export_assumptions(
    automaton: TimedAutomaton,
    prop: Optional[SafetyProperty] = None,
    env: Optional[ObservationEnvironment] = None,
) -> list[Assumption]:
    """Every axiom behind a verdict: environment restrictions, thresholds, timings."""
    env = env or ObservationEnvironment()
    out: list[Assumption] = []
    for obs in automaton.observations:
        p = automaton.observation_params.get(obs)
        if p is not None:
            out.append(Assumption(p.parameter, p.value, p.relation, f"observation:{obs}", "m"))
    for b in automaton.durations:
        named = False
        if b.max_name and b.max_duration is not None:
            out.append(Assumption(b.max_name, b.max_duration, "<=", f"duration:{b.step}", "s"))
            named = True
        if b.min_name:
            out.append(Assumption(b.min_name, b.min_duration, ">=", f"duration:{b.step}", "s"))
            named = True
        if not named:
            out.append(Assumption(f"{b.step}_duration", (b.min_duration, b.max_duration), "in", f"duration:{b.step}", "s"))
    if not automaton.durations:
        unit = automaton.time_unit
        for loc in automaton.locations:
            for c in loc.invariant:
                out.append(Assumption(f"{loc.name}.{c.clock}_max", c.value * unit, c.op, f"invariant:{loc.name}", "s"))
        for e in automaton.edges:
            for c in e.guard:
                name = f"{e.source}->{e.target}.{c.clock}" + (f"-{c.other}" if c.other else "")
                out.append(Assumption(name, c.value * unit, c.op, f"guard:{e.source}->{e.target}", "s"))
    for loc, lits in env.restrictions:
        text = " & ".join(n if v else f"!{n}" for n, v in lits)
        out.append(Assumption(f"env:{loc}", text, "holds", "environment"))
    return out


__all__ = [
    "Assumption",
    "ModelError",
    "Verdict",
    "Witness",
    "WitnessStep",
    "export_assumptions",
    "reachability",
    "replay_witness",
]
