"""Abstract road world shared by the spatial logic and the simulator.

Everything is one-dimensional per lane: an agent is a point (its front) plus a
body length, and the road space it claims is its *reservation*, the body plus
the distance it needs to brake to a standstill.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Optional, Sequence

# Geometric comparison tolerance in meters.
TOL = 1e-9

DEFAULT_B_MAX = 5.0
DEFAULT_PEDESTRIAN_WIDTH = 1.0

SIGN_KINDS = ("stop", "give-way")
AGENT_KINDS = ("car", "cyclist", "pedestrian")
TURN_SIGNALS = ("off", "left", "right")


class TrafficError(ValueError):
    """Malformed road network, agent, snapshot or view."""


Interval = tuple[float, float]


def _check_interval(iv: Sequence[float], length: float, what: str) -> Interval:
    lo, hi = float(iv[0]), float(iv[1])
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise TrafficError(f"{what}: interval bounds must be finite, got {iv!r}")
    if lo > hi:
        raise TrafficError(f"{what}: interval [{lo}, {hi}] has negative extent")
    if lo < -TOL or hi > length + TOL:
        raise TrafficError(f"{what}: interval [{lo}, {hi}] outside [0, {length}]")
    return (lo, hi)


@dataclass(frozen=True)
class Sign:
    kind: str
    lane: str
    pos: float


@dataclass(frozen=True)
class Crossing:
    lane: str
    interval: Interval


@dataclass(frozen=True)
class RoadNetwork:
    lanes: tuple[str, ...]
    lane_length: float
    intersection: Optional[dict] = None  # lane -> (lo, hi)
    signs: tuple[Sign, ...] = ()
    crossings: tuple[Crossing, ...] = ()

    def __post_init__(self):
        lanes = tuple(self.lanes)
        object.__setattr__(self, "lanes", lanes)
        if len(set(lanes)) != len(lanes):
            raise TrafficError(f"lane identifiers must be unique: {lanes}")
        if not lanes:
            raise TrafficError("road network needs at least one lane")
        if not (self.lane_length > 0 and math.isfinite(self.lane_length)):
            raise TrafficError(f"lane_length must be positive, got {self.lane_length}")
        if self.intersection:
            inter = {}
            for lane, iv in self.intersection.items():
                self._check_lane(lane)
                inter[lane] = _check_interval(iv, self.lane_length, f"intersection on {lane}")
            object.__setattr__(self, "intersection", inter)
        else:
            object.__setattr__(self, "intersection", None)
        signs = tuple(s if isinstance(s, Sign) else Sign(**s) for s in self.signs)
        for s in signs:
            if s.kind not in SIGN_KINDS:
                raise TrafficError(f"unknown sign kind {s.kind!r}")
            self._check_lane(s.lane)
            _check_interval((s.pos, s.pos), self.lane_length, f"{s.kind} sign")
        object.__setattr__(self, "signs", signs)
        crossings = []
        for c in self.crossings:
            if not isinstance(c, Crossing):
                c = Crossing(c["lane"], tuple(c["interval"]))
            self._check_lane(c.lane)
            crossings.append(Crossing(c.lane, _check_interval(c.interval, self.lane_length, "crossing")))
        object.__setattr__(self, "crossings", tuple(crossings))

    def _check_lane(self, lane: str) -> None:
        if lane not in self.lanes:
            raise TrafficError(f"unknown lane {lane!r}")

    def has_lane(self, lane: str) -> bool:
        return lane in self.lanes

    def intersection_on(self, lane: str) -> Optional[Interval]:
        if not self.intersection:
            return None
        return self.intersection.get(lane)

    def to_dict(self) -> dict:
        d = {"lanes": list(self.lanes), "lane_length": self.lane_length}
        if self.intersection:
            d["intersection"] = {k: list(v) for k, v in self.intersection.items()}
        d["signs"] = [{"kind": s.kind, "lane": s.lane, "pos": s.pos} for s in self.signs]
        d["crossings"] = [{"lane": c.lane, "interval": list(c.interval)} for c in self.crossings]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RoadNetwork":
        known = {"lanes", "lane_length", "intersection", "signs", "crossings"}
        extra = set(d) - known
        if extra:
            raise TrafficError(f"network: unknown field(s) {sorted(extra)}")
        for key in ("lanes", "lane_length"):
            if key not in d:
                raise TrafficError(f"network: missing field {key!r}")
        inter = d.get("intersection")
        return cls(
            lanes=tuple(str(x) for x in d["lanes"]),
            lane_length=float(d["lane_length"]),
            intersection={str(k): tuple(v) for k, v in inter.items()} if inter else None,
            signs=tuple(Sign(str(s["kind"]), str(s["lane"]), float(s["pos"])) for s in d.get("signs") or ()),
            crossings=tuple(Crossing(str(c["lane"]), tuple(c["interval"])) for c in d.get("crossings") or ()),
        )


@dataclass(frozen=True)
class Agent:
    id: str
    lane: str
    pos: float
    size: float
    speed: float = 0.0
    accel: float = 0.0
    aut: bool = False
    turn_signal: str = "off"
    kind: str = "car"

    def __post_init__(self):
        if not self.size > 0:
            raise TrafficError(f"agent {self.id}: size must be > 0, got {self.size}")
        if self.speed < 0:
            raise TrafficError(f"agent {self.id}: speed must be >= 0, got {self.speed}")
        if self.kind not in AGENT_KINDS:
            raise TrafficError(f"agent {self.id}: unknown kind {self.kind!r}")
        if self.turn_signal not in TURN_SIGNALS:
            raise TrafficError(f"agent {self.id}: unknown turn signal {self.turn_signal!r}")


@dataclass(frozen=True)
class Reservation:
    agent: str
    lane: str
    interval: Interval

    @property
    def lo(self) -> float:
        return self.interval[0]

    @property
    def hi(self) -> float:
        return self.interval[1]


@dataclass(frozen=True)
class View:
    lane: str
    extent: Interval
    owner: Optional[str] = None

    @property
    def lo(self) -> float:
        return self.extent[0]

    @property
    def hi(self) -> float:
        return self.extent[1]

    @property
    def length(self) -> float:
        return self.extent[1] - self.extent[0]

    def sub(self, lo: float, hi: float) -> "View":
        return View(self.lane, (lo, hi), self.owner)


def braking_distance(speed: float, b_max: float = DEFAULT_B_MAX) -> float:
    return speed * speed / (2.0 * b_max)


@dataclass(frozen=True)
class Snapshot:
    """The road world at one instant."""

    network: RoadNetwork
    agents: tuple[Agent, ...] = ()
    time: float = 0.0
    b_max: float = DEFAULT_B_MAX
    pedestrian_width: float = DEFAULT_PEDESTRIAN_WIDTH

    def __post_init__(self):
        agents = tuple(self.agents)
        object.__setattr__(self, "agents", agents)
        seen = set()
        for a in agents:
            if a.id in seen:
                raise TrafficError(f"duplicate agent id {a.id!r}")
            seen.add(a.id)
            if not self.network.has_lane(a.lane):
                raise TrafficError(f"agent {a.id}: unknown lane {a.lane!r}")
            if a.pos < -TOL or a.pos > self.network.lane_length + TOL:
                raise TrafficError(
                    f"agent {a.id}: pos {a.pos} outside [0, {self.network.lane_length}]"
                )
        if not self.b_max > 0:
            raise TrafficError(f"b_max must be > 0, got {self.b_max}")

    def agent(self, agent_id: str) -> Agent:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise TrafficError(f"unknown agent {agent_id!r}")

    def has_agent(self, agent_id: str) -> bool:
        return any(a.id == agent_id for a in self.agents)

    @cached_property
    def reservations(self) -> tuple[Reservation, ...]:
        return tuple(derive_reservations(self))

    def reservation_of(self, agent_id: str) -> Reservation:
        for r in self.reservations:
            if r.agent == agent_id:
                return r
        raise TrafficError(f"unknown agent {agent_id!r}")

    def without(self, *agent_ids: str) -> "Snapshot":
        return replace(self, agents=tuple(a for a in self.agents if a.id not in agent_ids))


def derive_reservations(snapshot: Snapshot) -> list[Reservation]:
    """Body plus braking envelope for every agent, clipped to the lane."""
    length = snapshot.network.lane_length
    out = []
    for a in snapshot.agents:
        if a.kind == "pedestrian":
            half = max(snapshot.pedestrian_width, 0.0) / 2.0
            lo, hi = a.pos - half, a.pos + half
        else:
            lo, hi = a.pos - a.size, a.pos + braking_distance(a.speed, snapshot.b_max)
        out.append(Reservation(a.id, a.lane, (min(max(lo, 0.0), length), min(max(hi, 0.0), length))))
    return out


def _overlaps(a: Interval, b: Interval) -> bool:
    """Positive-length overlap; touching intervals do not overlap."""
    return min(a[1], b[1]) - max(a[0], b[0]) > TOL


def occupied_intervals(snapshot: Snapshot, lane: str) -> list[Interval]:
    """Occupied stretches of ``lane``, including intersection projections.

    A reservation of an agent on another lane that overlaps that lane's part of
    the intersection blocks this lane's whole intersection interval.
    """
    net = snapshot.network
    if not net.has_lane(lane):
        raise TrafficError(f"unknown lane {lane!r}")
    occ = [r.interval for r in snapshot.reservations if r.lane == lane and r.hi - r.lo > TOL]
    mine = net.intersection_on(lane)
    if mine is not None:
        for r in snapshot.reservations:
            if r.lane == lane:
                continue
            theirs = net.intersection_on(r.lane)
            if theirs is not None and _overlaps(r.interval, theirs):
                occ.append(mine)
                break
    return sorted(occ)


def _check_view(snapshot: Snapshot, view: View) -> None:
    net = snapshot.network
    if not net.has_lane(view.lane):
        raise TrafficError(f"malformed view: unknown lane {view.lane!r}")
    lo, hi = view.extent
    if lo > hi + TOL or lo < -TOL or hi > net.lane_length + TOL:
        raise TrafficError(f"malformed view: extent [{lo}, {hi}] outside lane bounds")


def free_intervals(snapshot: Snapshot, view: View) -> list[Interval]:
    """Maximal stretches of the view that no reservation covers."""
    _check_view(snapshot, view)
    lo, hi = view.extent
    if hi - lo <= TOL:
        return [(lo, hi)]
    out = []
    cursor = lo
    for olo, ohi in occupied_intervals(snapshot, view.lane):
        if ohi <= cursor + TOL:
            continue
        if olo >= hi - TOL:
            break
        if olo > cursor + TOL:
            out.append((cursor, olo))
        cursor = max(cursor, ohi)
        if cursor >= hi - TOL:
            break
    if cursor < hi - TOL:
        out.append((cursor, hi))
    return out


def is_free(snapshot: Snapshot, view: View) -> bool:
    """True when no reservation overlaps the view; empty views are free."""
    _check_view(snapshot, view)
    if view.hi - view.lo <= TOL:
        return True
    return not any(_overlaps(o, view.extent) for o in occupied_intervals(snapshot, view.lane))


def view_ahead(snapshot: Snapshot, ego: str, horizon: float) -> View:
    """The stretch of road in front of ego's reservation."""
    r = snapshot.reservation_of(ego)
    length = snapshot.network.lane_length
    front = r.hi
    return View(r.lane, (front, min(front + max(horizon, 0.0), length)), ego)


def view_from_rear(snapshot: Snapshot, ego: str, horizon: float) -> View:
    """Ego's reservation plus ``horizon`` meters in front of it."""
    r = snapshot.reservation_of(ego)
    length = snapshot.network.lane_length
    return View(r.lane, (r.lo, min(r.hi + max(horizon, 0.0), length)), ego)


def signs_on(snapshot: Snapshot, lane: str, kind: Optional[str] = None) -> list[Sign]:
    return [s for s in snapshot.network.signs if s.lane == lane and (kind is None or s.kind == kind)]


def crossings_on(snapshot: Snapshot, lane: str) -> list[Crossing]:
    return [c for c in snapshot.network.crossings if c.lane == lane]


def agents_from(items: Iterable[dict]) -> tuple[Agent, ...]:
    out = []
    for d in items:
        out.append(
            Agent(
                id=str(d["id"]),
                lane=str(d["lane"]),
                pos=float(d["pos"]),
                size=float(d["size"]),
                speed=float(d.get("speed", 0.0)),
                accel=float(d.get("accel", 0.0)),
                aut=bool(d.get("aut", False)),
                turn_signal=str(d.get("turn_signal", "off")),
                kind=str(d.get("kind", "car")),
            )
        )
    return tuple(out)


__all__ = [
    "TOL",
    "Agent",
    "Crossing",
    "Interval",
    "Reservation",
    "RoadNetwork",
    "Sign",
    "Snapshot",
    "TrafficError",
    "View",
    "agents_from",
    "braking_distance",
    "crossings_on",
    "derive_reservations",
    "free_intervals",
    "is_free",
    "occupied_intervals",
    "signs_on",
    "view_ahead",
    "view_from_rear",
]
