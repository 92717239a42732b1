"""Independent reference implementations used as test oracles.

None of these reuse the decision procedures they check.
"""
from __future__ import annotations

import math

import numpy as np

from corrovv import logic as L
from corrovv.traffic import TOL, Snapshot, View, occupied_intervals

GRID = 0.01


# ------------------------------------------------------------ spatial logic


def grid_evaluate(snapshot: Snapshot, view: View, formula) -> bool:
    """Brute force over a 1 cm grid.

    Every sub-formula becomes a boolean matrix M[i, j] = "holds on [x_i, x_j]";
    chop is then a boolean matrix product over the split index.
    """
    lo_c = round(view.lo / GRID)
    hi_c = round(view.hi / GRID)
    xs = np.arange(lo_c, hi_c + 1) / 100.0
    n = len(xs)
    upper = np.triu(np.ones((n, n), dtype=bool))
    xi = xs[:, None]
    xj = xs[None, :]
    occ = occupied_intervals(snapshot, view.lane)

    def length_ok(cmp, v):
        d = xj - xi
        return {
            ">=": d >= v - TOL,
            ">": d > v + TOL,
            "<=": d <= v + TOL,
            "<": d < v - TOL,
            "=": np.abs(d - v) <= TOL,
        }[cmp]

    def mat(f):
        if isinstance(f, L.Free):
            bad = np.zeros((n, n), dtype=bool)
            for a, b in occ:
                bad |= (np.minimum(b, xj) - np.maximum(a, xi)) > TOL
            return ~bad
        if isinstance(f, L.Re):
            r = next(r for r in snapshot.reservations if r.agent == f.agent)
            if r.lane != view.lane:
                return np.zeros((n, n), dtype=bool)
            return (np.abs(xi - r.lo) <= TOL) & (np.abs(xj - r.hi) <= TOL) & (xj - xi > TOL)
        if isinstance(f, L.Aut):
            val = next(a for a in snapshot.agents if a.id == f.agent).aut == f.value
            return np.full((n, n), val)
        if isinstance(f, L.SignAhead):
            m = np.zeros((n, n), dtype=bool)
            for s in snapshot.network.signs:
                if s.lane == view.lane and s.kind == f.kind:
                    m |= (xi - TOL <= s.pos) & (s.pos <= xj + TOL)
            return m
        if isinstance(f, L.CrossingAhead):
            m = np.zeros((n, n), dtype=bool)
            for c in snapshot.network.crossings:
                if c.lane == view.lane:
                    m |= (c.interval[0] <= xj + TOL) & (c.interval[1] >= xi - TOL)
            return m
        if isinstance(f, L.Len):
            v = f.value
            if isinstance(v, L.SizeOf):
                v = next(a for a in snapshot.agents if a.id == v.agent).size + v.margin
            return length_ok(f.cmp, v)
        if isinstance(f, L.Not):
            return ~mat(f.arg)
        if isinstance(f, L.And):
            return mat(f.left) & mat(f.right)
        if isinstance(f, L.Or):
            return mat(f.left) | mat(f.right)
        if isinstance(f, L.Chop):
            a = (mat(f.left) & upper).astype(np.float32)
            b = (mat(f.right) & upper).astype(np.float32)
            return (a @ b) > 0.5
        raise TypeError(f)

    return bool(mat(formula)[0, n - 1])


# ------------------------------------------------------------ timed automata

QUARTER = 4


def explicit_reachable(automaton, prop, env=None) -> bool:
    """Bad-state reachability on a 1/4 time-unit grid, no zones.

    Clock values are clamped just above the largest constant; pairwise
    differences are tracked separately (clamped the same way) so that
    diagonal constraints stay exact once both clocks exceed the cap.
    """
    from itertools import product

    from corrovv.automata.model import BadAnd, BadAtom, BadNot, BadOr

    clocks = list(automaton.clocks)
    n = len(clocks)
    ci = {c: k for k, c in enumerate(clocks)}
    k = automaton.max_constant()
    k = max([k] + [abs(c.value) for c in prop.clock])
    cap = QUARTER * k + 1
    obs = list(automaton.observations)
    opos = {o: i for i, o in enumerate(obs)}

    def allowed(loc):
        lits = []
        for where, ls in (env.restrictions if env else ()):
            if where in ("*", loc):
                lits.extend(ls)
        return [v for v in product((False, True), repeat=len(obs)) if all(v[opos[o]] == b for o, b in lits)]

    hist_atoms = []
    stack = [prop.bad]
    while stack:
        e = stack.pop()
        if isinstance(e, BadAtom):
            if e.kind in ("visited", "seen") and e not in hist_atoms:
                hist_atoms.append(e)
        elif isinstance(e, BadNot):
            stack.append(e.arg)
        else:
            stack.extend([e.right, e.left])

    def upd(hist, loc, val):
        return tuple(
            h or (loc == a.name if a.kind == "visited" else val[opos[a.name]]) for h, a in zip(hist, hist_atoms)
        )

    def clamp(x):
        return max(-cap, min(cap, x))

    def holds(cs, vals, diffs):
        for c in cs:
            if c.other is None:
                lhs = vals[ci[c.clock]]
            else:
                lhs = diffs[ci[c.clock]][ci[c.other]]
            r = QUARTER * c.value
            ok = {"<": lhs < r, "<=": lhs <= r, "==": lhs == r, ">=": lhs >= r, ">": lhs > r}[c.op]
            if not ok:
                return False
        return True

    def bad(loc, val, hist, vals, diffs):
        hm = dict(zip(hist_atoms, hist))

        def ev(e):
            if isinstance(e, BadAtom):
                if e.kind == "true":
                    return True
                if e.kind == "at":
                    return loc == e.name
                if e.kind == "obs":
                    return val[opos[e.name]]
                return hm[e]
            if isinstance(e, BadNot):
                return not ev(e.arg)
            if isinstance(e, BadAnd):
                return ev(e.left) and ev(e.right)
            assert isinstance(e, BadOr)
            return ev(e.left) or ev(e.right)

        return ev(prop.bad) and holds(prop.clock, vals, diffs)

    inv = {loc.name: loc.invariant for loc in automaton.locations}
    zero_v = tuple([0] * n)
    zero_d = tuple(tuple([0] * n) for _ in range(n))
    if not holds(inv[automaton.initial], zero_v, zero_d):
        return False
    h0 = tuple(False for _ in hist_atoms)
    frontier = []
    seen = set()
    for val in allowed(automaton.initial):
        s = (automaton.initial, val, upd(h0, automaton.initial, val), zero_v, zero_d)
        if s not in seen:
            seen.add(s)
            frontier.append(s)
    while frontier:
        s = frontier.pop()
        loc, val, hist, vals, diffs = s
        if bad(*s):
            return True
        succ = []
        nv = tuple(min(cap, v + 1) for v in vals)
        if holds(inv[loc], nv, diffs):
            succ.append((loc, val, hist, nv, diffs))
        for v2 in allowed(loc):
            if v2 != val:
                succ.append((loc, v2, upd(hist, loc, v2), vals, diffs))
        for e in automaton.edges:
            if e.source != loc or not holds(e.guard, vals, diffs):
                continue
            if any(val[opos[o]] != b for o, b in e.observe):
                continue
            rv = list(vals)
            rs = {ci[x] for x in e.resets}
            for x in rs:
                rv[x] = 0
            rd = [list(r) for r in diffs]
            for i in range(n):
                for j in range(n):
                    if i in rs or j in rs:
                        rd[i][j] = clamp(rv[i] - rv[j]) if (i in rs and j in rs) else (
                            clamp(-rv[j]) if i in rs else clamp(rv[i])
                        )
            rv = tuple(rv)
            rd = tuple(tuple(r) for r in rd)
            if not holds(inv[e.target], rv, rd):
                continue
            al = allowed(e.target)
            for v2 in ([val] if val in al else al):
                succ.append((e.target, v2, upd(hist, e.target, v2), rv, rd))
        for t in succ:
            if t not in seen:
                seen.add(t)
                frontier.append(t)
    return False


# ------------------------------------------------------------ assertions


def _reference_values(trace):
    """Plain per-step dictionaries; absent agents are simply missing."""
    steps = trace.steps
    return [{a["id"]: a for a in s["agents"]} for s in steps]


class NaiveTraceEvaluator:
    """Scalar, step-by-step predicate semantics (no numpy columns).

    ``value(node, k)`` must be requested in ascending ``k`` per node, which
    :meth:`column` guarantees; ``once`` and ``prev`` rely on it.
    """

    def __init__(self, trace):
        from corrovv.traffic import TOL

        self.tol = TOL
        self.trace = trace
        self.h = trace.header
        self.steps = trace.steps
        self.agents = _reference_values(trace)
        self.memo: dict = {}

    def column(self, node) -> list:
        return [self.value(node, k) for k in range(len(self.steps))]

    def _agent(self, name):
        from corrovv.assertions.predicates import Ident

        n = name.name if isinstance(name, Ident) else name.value
        return self.h["ego"] if n == "ego" else n

    def _field(self, aid, k, key):
        a = self.agents[k].get(aid)
        if a is None:
            return {"lane": "", "turn_signal": "", "aut": False}.get(key, math.nan)
        return a[key]

    def _gap(self, a, b, k):
        me = self.agents[k].get(a)
        if me is None:
            return math.nan
        if a == b:
            return math.inf
        other = self.agents[k].get(b)
        if other is None or other["lane"] != me["lane"] or other["pos"] < me["pos"]:
            return math.inf
        return other["pos"] - self.h["agents"][b]["size"] - me["pos"]

    def _inside(self, aid, k):
        a = self.agents[k].get(aid)
        if a is None:
            return False
        iv = (self.h["network"].get("intersection") or {}).get(a["lane"])
        if iv is None:
            return False
        size = self.h["agents"][aid]["size"]
        return min(a["pos"], iv[1]) - max(a["pos"] - size, iv[0]) > self.tol

    def value(self, node, k):
        key = (id(node), k)
        if key not in self.memo:
            self.memo[key] = self._value(node, k)
        return self.memo[key]

    def _value(self, n, k):
        from corrovv.assertions import predicates as P

        if isinstance(n, P.Num):
            return n.value
        if isinstance(n, P.Str):
            return n.value
        if isinstance(n, P.Ident):
            consts = {"true": True, "false": False, "inf": math.inf, "b_max": self.h["b_max"]}
            if n.name in consts:
                return consts[n.name]
            if n.name in ("v_max", "a_max"):
                return self.h["agents"][self.h["ego"]][n.name]
            return bool(self.steps[k]["observations"][n.name])
        if isinstance(n, P.Neg):
            return -self.value(n.arg, k)
        if isinstance(n, P.Arith):
            a, b = self.value(n.left, k), self.value(n.right, k)
            r = a + b if n.op == "+" else a - b
            return r
        if isinstance(n, P.Not):
            return not self.value(n.arg, k)
        if isinstance(n, P.And):
            return bool(self.value(n.left, k)) & bool(self.value(n.right, k))
        if isinstance(n, P.Or):
            return bool(self.value(n.left, k)) | bool(self.value(n.right, k))
        if isinstance(n, P.Cmp):
            a, b = self.value(n.left, k), self.value(n.right, k)
            if isinstance(a, float) and math.isnan(a) or isinstance(b, float) and math.isnan(b):
                return n.op == "!="
            return {"<": a < b, "<=": a <= b, "==": a == b, "!=": a != b, ">=": a >= b, ">": a > b}[n.op]
        f, args = n.name, n.args
        if f in ("speed", "pos", "accel", "lane", "turn_signal", "aut"):
            return self._field(self._agent(args[0]), k, f)
        if f == "present":
            return self._agent(args[0]) in self.agents[k]
        if f in ("size", "v_max", "a_max"):
            aid = self._agent(args[0])
            return float(self.h["agents"][aid][f]) if aid in self.agents[k] else math.nan
        if f == "time":
            return self.steps[k]["time"]
        if f in ("location", "action"):
            return self.steps[k][f]
        if f == "dwell":
            j = k
            while j > 0 and self.steps[j - 1]["location"] == self.steps[k]["location"]:
                j -= 1
            return self.steps[k]["time"] - self.steps[j]["time"]
        if f == "obs":
            return bool(self.steps[k]["observations"][self._agent(args[0])])
        if f == "in_intersection":
            return self._inside(self._agent(args[0]), k)
        if f == "enters_intersection":
            aid = self._agent(args[0])
            return self._inside(aid, k) and not (k > 0 and self._inside(aid, k - 1))
        if f == "min_gap":
            a = self._agent(args[0])
            if isinstance(args[1], P.Star):
                if a not in self.agents[k]:
                    return math.nan
                return min([math.inf] + [self._gap(a, b, k) for b in self.h["agents"] if b != a])
            return self._gap(a, self._agent(args[1]), k)
        if f == "distance_to":
            a = self._agent(args[0])
            target = self._agent(args[1])
            if target != "intersection":
                return self._gap(a, target, k)
            me = self.agents[k].get(a)
            if me is None:
                return math.nan
            iv = (self.h["network"].get("intersection") or {}).get(me["lane"])
            if iv is None or iv[1] < me["pos"] - self.tol:
                return math.inf
            return max(iv[0] - me["pos"], 0.0)
        if f == "prev":
            if k == 0:
                v = self.value(args[0], 0)
                return False if isinstance(v, bool) else ("" if isinstance(v, str) else math.nan)
            return self.value(args[0], k - 1)
        if f == "once":
            return bool(self.value(args[0], k)) or (k > 0 and self.value(n, k - 1))
        raise NotImplementedError(f)


def naive_check(trace, assertion) -> dict:
    """Full-scan assertion semantics: every step, every reference, every window."""
    ev = NaiveTraceEvaluator(trace)
    n = len(trace.steps)
    cond = ev.column(assertion.condition)
    times = [s["time"] for s in trace.steps]
    ego = trace.header["ego"]
    pos = [ev._field(ego, k, "pos") for k in range(n)]
    out = {"verdict": "pass", "reference_points": [], "failures": [], "clipped": []}
    if assertion.kind == "invariant":
        out["failures"] = [(None, k) for k in range(n) if not cond[k]]
    else:
        trig = ev.column(assertion.trigger)
        if assertion.edges == "all":
            refs = [k for k in range(n) if trig[k]]
        else:
            refs = [k for k in range(n) if trig[k] and not (k > 0 and trig[k - 1])]
        out["reference_points"] = refs
        if not refs:
            out["verdict"] = "vacuous"
            return out
        w, tol = assertion.window, 1e-9
        for r in refs:
            if assertion.kind == "execution":
                window = [r]
            elif assertion.flavor == "temporal":
                if assertion.kind == "pre":
                    window = [j for j in range(r) if times[j] >= times[r] - w - tol]
                    clipped = times[r] - w < times[0] - tol
                else:
                    window = [j for j in range(r + 1, n) if times[j] <= times[r] + w + tol]
                    clipped = times[r] + w > times[-1] + tol
            else:
                if assertion.kind == "pre":
                    window = [j for j in range(r) if -tol <= pos[r] - pos[j] <= w + tol]
                    clipped = not any(pos[r] - pos[j] >= w - tol for j in range(r + 1))
                else:
                    window = [j for j in range(r + 1, n) if -tol <= pos[j] - pos[r] <= w + tol]
                    clipped = not any(pos[j] - pos[r] >= w - tol for j in range(r, n))
            if assertion.kind != "execution" and clipped:
                out["clipped"].append(r)
            out["failures"] += [(r, j) for j in window if not cond[j]]
    if out["failures"]:
        out["verdict"] = "fail"
    return out
