import pytest

from corrovv.traffic import (
    Agent,
    RoadNetwork,
    Snapshot,
    TrafficError,
    View,
    braking_distance,
    derive_reservations,
    free_intervals,
    is_free,
    occupied_intervals,
    view_ahead,
    view_from_rear,
)


def net(**kw):
    base = dict(lanes=("a", "b"), lane_length=100.0)
    base.update(kw)
    return RoadNetwork(**base)


def test_braking_distance():
    assert braking_distance(10.0, 5.0) == pytest.approx(10.0)
    assert braking_distance(0.0) == 0.0


def test_reservation_body_plus_braking():
    s = Snapshot(net(), (Agent("E", "a", 20.0, 4.5, speed=10.0),))
    (r,) = derive_reservations(s)
    assert r.interval == pytest.approx((15.5, 30.0))


def test_reservation_clipped_at_lane_start_and_end():
    s = Snapshot(net(), (Agent("E", "a", 2.0, 4.5), Agent("F", "b", 99.0, 1.0, speed=10.0)))
    assert s.reservation_of("E").interval == (0.0, 2.0)
    assert s.reservation_of("F").interval == (98.0, 100.0)


def test_pedestrian_reservation_is_centered():
    s = Snapshot(net(), (Agent("P", "a", 10.0, 0.5, kind="pedestrian"),), pedestrian_width=2.0)
    assert s.reservation_of("P").interval == (9.0, 11.0)


def test_agent_validation():
    with pytest.raises(TrafficError, match="size"):
        Agent("E", "a", 0.0, 0.0)
    with pytest.raises(TrafficError, match="speed"):
        Agent("E", "a", 0.0, 1.0, speed=-1)
    with pytest.raises(TrafficError, match="unknown lane"):
        Snapshot(net(), (Agent("E", "zz", 1.0, 1.0),))
    with pytest.raises(TrafficError, match="duplicate"):
        Snapshot(net(), (Agent("E", "a", 1.0, 1.0), Agent("E", "a", 5.0, 1.0)))


def test_network_rejects_out_of_range_intervals():
    with pytest.raises(TrafficError):
        net(intersection={"a": (90.0, 110.0)})


def test_free_intervals_and_touching():
    s = Snapshot(net(), (Agent("A", "a", 20.0, 5.0), Agent("B", "a", 40.0, 5.0)))
    assert free_intervals(s, View("a", (0.0, 50.0))) == [(0.0, 15.0), (20.0, 35.0), (40.0, 50.0)]
    # Touching at an endpoint is not an overlap.
    assert is_free(s, View("a", (20.0, 35.0)))
    assert not is_free(s, View("a", (19.0, 21.0)))


def test_intersection_projection_blocks_whole_interval():
    n = net(intersection={"a": (40.0, 50.0), "b": (10.0, 20.0)})
    s = Snapshot(n, (Agent("M", "b", 15.0, 1.0),))
    assert occupied_intervals(s, "a") == [(40.0, 50.0)]
    assert not is_free(s, View("a", (49.0, 60.0)))
    assert is_free(s.without("M"), View("a", (49.0, 60.0)))


def test_views():
    s = Snapshot(net(), (Agent("E", "a", 20.0, 4.5, speed=10.0),))
    assert view_ahead(s, "E", 5.0).extent == (30.0, 35.0)
    assert view_from_rear(s, "E", 5.0).extent == (15.5, 35.0)
    assert view_ahead(s, "E", 500.0).hi == 100.0


def test_malformed_view():
    s = Snapshot(net())
    with pytest.raises(TrafficError, match="malformed view"):
        is_free(s, View("a", (-5.0, 3.0)))
    with pytest.raises(TrafficError, match="malformed view"):
        free_intervals(s, View("q", (0.0, 3.0)))
