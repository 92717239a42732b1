"""Seeded random generators for scenes, formulas, automata and traces."""
from __future__ import annotations

import math
import random

from corrovv import logic as L
from corrovv.traffic import Agent, Crossing, RoadNetwork, Sign, Snapshot, View

LANE_NAMES = ("a", "b", "c")
# Braking distances of 0, 0.5, 1 and 2 m at b_max = 5.
SPEEDS = (0.0, math.sqrt(5.0), math.sqrt(10.0), math.sqrt(20.0))


def _half(rng: random.Random, lo: float, hi: float) -> float:
    return rng.randint(int(lo * 2), int(hi * 2)) / 2.0


def random_scene(rng: random.Random, lane_length: float = 12.0) -> Snapshot:
    """Scene with every boundary on a 0.5 m lattice, ≤ 3 lanes, ≤ 5 agents."""
    lanes = LANE_NAMES[: rng.randint(1, 3)]
    intersection = None
    if len(lanes) > 1 and rng.random() < 0.5:
        intersection = {}
        for lane in rng.sample(lanes, 2):
            lo = _half(rng, 0, lane_length - 2)
            intersection[lane] = (lo, lo + _half(rng, 0.5, 2))
    signs = tuple(
        Sign(rng.choice(("stop", "give-way")), rng.choice(lanes), _half(rng, 0, lane_length))
        for _ in range(rng.randint(0, 2))
    )
    crossings = []
    for _ in range(rng.randint(0, 2)):
        lo = _half(rng, 0, lane_length - 1)
        crossings.append(Crossing(rng.choice(lanes), (lo, lo + _half(rng, 0, 1))))
    net = RoadNetwork(lanes, lane_length, intersection, signs, tuple(crossings))
    agents = []
    for k in range(rng.randint(0, 5)):
        kind = rng.choice(("car", "car", "cyclist", "pedestrian"))
        agents.append(
            Agent(
                id=f"A{k}",
                lane=rng.choice(lanes),
                pos=_half(rng, 0, lane_length),
                size=_half(rng, 0.5, 3),
                speed=0.0 if kind == "pedestrian" else rng.choice(SPEEDS),
                aut=rng.random() < 0.5,
                kind=kind,
            )
        )
    return Snapshot(net, tuple(agents))


def random_view(rng: random.Random, snap: Snapshot, max_len: float = 6.0) -> View:
    lane = rng.choice(snap.network.lanes)
    lo = _half(rng, 0, snap.network.lane_length)
    hi = min(lo + _half(rng, 0, max_len), snap.network.lane_length)
    return View(lane, (lo, hi))


def random_atom(rng: random.Random, agents: list[str]) -> L.Formula:
    choices = ["free", "free", "len", "len", "sign", "crossing"]
    if agents:
        choices += ["re", "re", "aut", "size"]
    k = rng.choice(choices)
    if k == "free":
        return L.Free()
    if k == "len":
        return L.Len(rng.choice(L.CMPS), _half(rng, 0, 4))
    if k == "size":
        return L.Len(rng.choice(L.CMPS), L.SizeOf(rng.choice(agents)))
    if k == "sign":
        return L.SignAhead(rng.choice(("stop", "give-way")))
    if k == "crossing":
        return L.CrossingAhead()
    if k == "re":
        return L.Re(rng.choice(agents))
    return L.Aut(rng.choice(agents), rng.random() < 0.5)


def random_formula(rng: random.Random, agents: list[str], depth: int = 4, chop_bias: float = 0.4) -> L.Formula:
    if depth == 0 or rng.random() < 0.25:
        return random_atom(rng, agents)
    r = rng.random()
    if r < chop_bias:
        return L.Chop(random_formula(rng, agents, depth - 1), random_formula(rng, agents, depth - 1))
    if r < chop_bias + 0.15:
        return L.Not(random_formula(rng, agents, depth - 1))
    op = L.And if rng.random() < 0.5 else L.Or
    return op(random_formula(rng, agents, depth - 1), random_formula(rng, agents, depth - 1))


# ------------------------------------------------------------ timed automata


def random_automaton(rng: random.Random, max_locs: int = 4, max_clocks: int = 2, max_const: int = 3):
    """Small random automaton plus environment and safety property."""
    from corrovv.automata.model import (
        ClockConstraint,
        Edge,
        Location,
        ObservationEnvironment,
        SafetyProperty,
        TimedAutomaton,
    )

    clocks = ("x", "y")[: rng.randint(1, max_clocks)]
    obs = ("p", "q")[: rng.randint(0, 2)]
    names = [f"l{k}" for k in range(rng.randint(1, max_locs))]

    def cc(allow_diag=True):
        c = rng.choice(clocks)
        op = rng.choice(("<", "<=", "==", ">=", ">"))
        if allow_diag and len(clocks) == 2 and rng.random() < 0.25:
            other = "y" if c == "x" else "x"
            return ClockConstraint(c, op, rng.randint(-max_const, max_const), other)
        return ClockConstraint(c, op, rng.randint(0, max_const))

    locs = []
    for nm in names:
        inv = ()
        if rng.random() < 0.4:
            inv = (ClockConstraint(rng.choice(clocks), rng.choice(("<", "<=")), rng.randint(1, max_const)),)
        locs.append(Location(nm, inv))
    edges = []
    for _ in range(rng.randint(1, 2 * len(names) + 1)):
        guard = tuple(cc() for _ in range(rng.randint(0, 2)))
        observe = tuple((o, rng.random() < 0.5) for o in obs if rng.random() < 0.3)
        resets = tuple(c for c in clocks if rng.random() < 0.4)
        edges.append(Edge(rng.choice(names), rng.choice(names), guard, observe, "", resets))
    aut = TimedAutomaton("rand", clocks, obs, tuple(locs), names[0], tuple(edges), 1.0)
    restr = []
    if obs and rng.random() < 0.4:
        restr.append((rng.choice(names + ["*"]), ((rng.choice(obs), rng.random() < 0.5),)))
    env = ObservationEnvironment(tuple(restr))
    atoms = [f"at({rng.choice(names)})", f"visited({rng.choice(names)})"]
    if obs:
        atoms += [f"seen({rng.choice(obs)})", rng.choice(obs)]
    bad = rng.choice(atoms)
    for _ in range(rng.randint(0, 2)):
        a = rng.choice(atoms)
        if rng.random() < 0.3:
            a = "!" + a
        bad = f"{bad} {rng.choice(('&', '|'))} {a}"
    clock = None
    if rng.random() < 0.5:
        clock = str(cc())
    return aut, env, SafetyProperty.parse("rand", bad, clock)


# ------------------------------------------------------------ traces


TRACE_LOCATIONS = ("start", "decelerate", "stopped", "proceed")


def random_trace(rng: random.Random, max_steps: int = 1000):
    """Synthetic trace on a lattice: times are k·dt, positions multiples of 0.25 m.

    Agents X and Y may be absent for stretches, which exercises the NaN paths.
    """
    from corrovv.simulator import TRACE_FORMAT, Trace

    n = rng.randint(1, max_steps)
    dt = rng.choice((0.1, 0.25, 0.5))
    lanes = ["main", "cross"]
    net = {
        "lanes": lanes,
        "lane_length": 400.0,
        "intersection": {"main": [40.0, 50.0], "cross": [20.0, 30.0]},
        "signs": [],
        "crossings": [],
    }
    static = {
        "E": {"size": 4.5, "kind": "car", "a_max": 2.0, "v_max": 15.0},
        "X": {"size": 2.0, "kind": "car", "a_max": 2.0, "v_max": 10.0},
        "Y": {"size": 1.0, "kind": "cyclist", "a_max": 2.0, "v_max": 8.0},
    }
    header = {
        "format": TRACE_FORMAT, "ego": "E", "dt": dt, "duration": (n - 1) * dt, "seed": 0, "b_max": 5.0,
        "pedestrian_width": 1.0, "network": net, "agents": static,
        "observations": {"p": {}, "q": {}},
    }
    state = {
        "E": ["main", rng.randint(0, 80) * 0.25, 0.0],
        "X": ["main", rng.randint(0, 240) * 0.25, 0.0],
        "Y": [rng.choice(lanes), rng.randint(0, 240) * 0.25, 0.0],
    }
    present = {"E": True, "X": rng.random() < 0.8, "Y": rng.random() < 0.6}
    loc = "start"
    obs = {"p": False, "q": False}
    flip = rng.choice((0.02, 0.1, 0.3))
    steps = []
    for k in range(n):
        if rng.random() < flip:
            loc = rng.choice(TRACE_LOCATIONS)
        for o in obs:
            if rng.random() < flip:
                obs[o] = not obs[o]
        agents = []
        for aid in ("E", "X", "Y"):
            if aid != "E" and rng.random() < 0.02:
                present[aid] = not present[aid]
            lane, pos, speed = state[aid]
            if rng.random() < 0.2:
                speed = rng.choice((0.0, 0.0, 1.0, 2.0, 4.0))
            # Position moves by a lattice amount (sometimes backwards for others).
            pos = min(max(pos + rng.choice((0.0, 0.25, 0.5, 1.0)) * (1 if speed > 0 else 0), 0.0), 400.0)
            if aid != "E" and rng.random() < 0.05:
                pos = rng.randint(0, 240) * 0.25
            accel = rng.choice((-2.0, -1.0, 0.0, 0.0, 1.0))
            state[aid] = [lane, pos, speed]
            if present[aid]:
                agents.append({"id": aid, "lane": lane, "pos": pos, "speed": speed, "accel": accel,
                               "turn_signal": rng.choice(("off", "off", "left")), "aut": aid == "E"})
        steps.append({"step": k, "time": round(k * dt, 9), "agents": agents, "observations": dict(obs),
                      "location": loc, "action": loc})
    return Trace(header, steps)


def _num_expr(rng: random.Random, depth: int) -> str:
    agent = rng.choice(("ego", "E", "X", "Y"))
    leaves = [
        f"speed({agent})", f"pos({agent})", f"accel({agent})", f"size({agent})", "time()", "dwell()",
        f"min_gap(ego, {rng.choice(('X', 'Y', '*'))})", f"distance_to(ego, {rng.choice(('X', 'Y', 'intersection'))})",
        str(rng.choice((0, 0.5, 1, 2, 4, 10, 40))),
    ]
    e = rng.choice(leaves)
    if depth > 0 and rng.random() < 0.25:
        e = f"prev({e})"
    if depth > 0 and rng.random() < 0.2:
        e = f"{e} {rng.choice(('+', '-'))} {rng.choice(leaves)}"
    return e


def random_predicate(rng: random.Random, depth: int = 3) -> str:
    """Well-typed boolean predicate over the fields of :func:`random_trace`."""
    if depth == 0 or rng.random() < 0.3:
        r = rng.random()
        if r < 0.4:
            op = rng.choice(("<", "<=", "==", "!=", ">=", ">"))
            return f"{_num_expr(rng, depth)} {op} {_num_expr(rng, 0)}"
        if r < 0.55:
            return rng.choice(("p", "q", "obs(p)", "obs(q)"))
        if r < 0.7:
            return f'location() {rng.choice(("==", "!="))} "{rng.choice(TRACE_LOCATIONS)}"'
        if r < 0.8:
            return f'action() == "{rng.choice(TRACE_LOCATIONS)}"'
        if r < 0.9:
            return f"{rng.choice(('in_intersection', 'enters_intersection', 'present'))}({rng.choice(('ego', 'X', 'Y'))})"
        return rng.choice(("true", "false", 'lane(X) == "main"', "aut(ego)"))
    r = rng.random()
    if r < 0.35:
        return f"({random_predicate(rng, depth - 1)}) & ({random_predicate(rng, depth - 1)})"
    if r < 0.65:
        return f"({random_predicate(rng, depth - 1)}) | ({random_predicate(rng, depth - 1)})"
    if r < 0.8:
        return f"!({random_predicate(rng, depth - 1)})"
    if r < 0.9:
        return f"once({random_predicate(rng, depth - 1)})"
    return f"prev({random_predicate(rng, depth - 1)})"


def random_assertion(rng: random.Random, name: str = "a", kind=None):
    from corrovv.assertions import Assertion

    kind = kind or rng.choice(("invariant", "execution", "pre", "post"))
    cond = random_predicate(rng)
    if kind == "invariant":
        return Assertion.make(name, kind, cond)
    trig = random_predicate(rng, 2)
    edges = "all" if rng.random() < 0.15 else "rising"
    if kind == "execution":
        return Assertion.make(name, kind, cond, trig, edges=edges)
    flavor = rng.choice(("temporal", "physical"))
    window = rng.choice((0.1, 0.25, 0.5, 1.0, 2.0, 5.0))
    return Assertion.make(name, kind, cond, trig, flavor=flavor, window=window, edges=edges)
