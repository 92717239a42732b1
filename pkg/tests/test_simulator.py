import pytest

from corrovv.simulator import (
    AgentSpec,
    Scenario,
    ScenarioError,
    SimulationError,
    Simulation,
    TraceError,
    action_command,
    load_scenario,
    loads_scenario,
    loads_trace,
    q,
    run,
)
from corrovv.traffic import Agent


@pytest.fixture(scope="module")
def fig2_traces(stop_models):
    from corrovv import data_path

    ctrl, _ = stop_models
    sc = load_scenario(data_path("fig2.scn"))
    return sc, {n: run(sc, a) for n, a in ctrl.items()}


def first(trace, loc):
    return next(s["step"] for s in trace.steps if s["location"] == loc)


def test_quantization():
    assert q(0.1 + 0.2) == 0.3
    assert str(q(-0.0)) == "0.0"


def test_step_count_and_timing(fig2_traces):
    sc, traces = fig2_traces
    tr = traces["stop_rule"]
    assert sc.steps == 151 and len(tr) == 151
    assert tr.steps[-1]["time"] == 15.0
    assert [s["step"] for s in tr.steps] == list(range(151))


def test_correct_controller_sequence(fig2_traces):
    _, traces = fig2_traces
    tr = traces["stop_rule"]
    dec, stop, go = first(tr, "decelerate"), first(tr, "stopped"), first(tr, "proceed")
    assert dec < stop < go
    ego = lambda k: next(a for a in tr.steps[k]["agents"] if a["id"] == "E")  # noqa: E731
    assert ego(stop)["speed"] == 0.0
    assert ego(stop)["pos"] <= 48.0
    # Waits while the cyclist blocks the junction.
    assert all(not tr.steps[k]["observations"]["safe_gap"] for k in range(stop, go - 1))
    assert tr.steps[go]["observations"]["safe_gap"]


def test_faulty_controller_rolls_through(fig2_traces):
    _, traces = fig2_traces
    tr = traces["stop_rule_faulty"]
    assert all(s["location"] != "stopped" for s in tr.steps)
    go = first(tr, "proceed")
    e = next(a for a in tr.steps[go]["agents"] if a["id"] == "E")
    assert e["speed"] > 0


def test_recorded_accel_is_commanded(fig2_traces):
    _, traces = fig2_traces
    tr = traces["stop_rule"]
    for a, b in zip(tr.steps, tr.steps[1:]):
        ea = next(x for x in a["agents"] if x["id"] == "E")
        eb = next(x for x in b["agents"] if x["id"] == "E")
        assert eb["speed"] == pytest.approx(ea["speed"] + ea["accel"] * 0.1, abs=1e-8)
        assert eb["pos"] == pytest.approx(ea["pos"] + ea["speed"] * 0.1, abs=1e-8)


def test_deterministic_bytes(fig2_traces, stop_models):
    sc, traces = fig2_traces
    ctrl, _ = stop_models
    assert run(sc, ctrl["stop_rule"]).dumps() == traces["stop_rule"].dumps()


def test_trace_roundtrip(fig2_traces):
    _, traces = fig2_traces
    tr = traces["stop_rule"]
    back = loads_trace(tr.dumps())
    assert back.dumps() == tr.dumps()
    lines = tr.dumps().splitlines()
    with pytest.raises(TraceError):
        loads_trace("\n".join(lines[:3] + lines[4:]))


def test_scenario_roundtrip(fig2_traces):
    sc, _ = fig2_traces
    assert loads_scenario(sc.dumps()).digest() == sc.digest()


def test_sim_overrides(fig2_traces, stop_models):
    sc, _ = fig2_traces
    ctrl, _ = stop_models
    short = sc.with_sim(duration=2.0)
    assert len(run(short, ctrl["stop_rule"])) == 21


def test_scenario_validation(fig2_traces):
    sc, _ = fig2_traces
    d = sc.to_dict()
    from corrovv.simulator import scenario_from_dict

    with pytest.raises(ScenarioError, match="dt"):
        scenario_from_dict({**d, "sim": {**d["sim"], "dt": 0}})
    with pytest.raises(ScenarioError, match="ego"):
        scenario_from_dict({**d, "sim": {**d["sim"], "ego": "Q"}})
    ev = [{"agent": "E", "start": 1.0, "accel": 1.0}]
    with pytest.raises(ScenarioError, match="cannot be scripted"):
        scenario_from_dict({**d, "events": ev})


def test_unbound_controller_observation(fig2_traces, stop_models):
    sc, _ = fig2_traces
    ctrl, _ = stop_models
    from dataclasses import replace

    bare = replace(sc, observations=sc.observations[:1])
    with pytest.raises(ScenarioError, match="not bound"):
        run(bare, ctrl["stop_rule"])


def test_ego_past_lane_end(stop_models):
    from corrovv.traffic import RoadNetwork

    ctrl, _ = stop_models
    sc = Scenario(RoadNetwork(("main",), 20.0), (AgentSpec(Agent("E", "main", 15.0, 4.5, 10.0, aut=True), cruise=10.0),),
                  "E", duration=3.0)
    with pytest.raises(SimulationError, match="end of lane"):
        run(sc, ctrl["stop_rule"])


def test_action_table():
    spec = AgentSpec(Agent("E", "main", 0.0, 4.5, 5.0), a_max=2.0, v_max=15.0, cruise=10.0)
    assert action_command("decelerate", 5.0, spec, 5.0, 0.1) == -5.0
    assert action_command("decelerate", 0.2, spec, 5.0, 0.1) == pytest.approx(-2.0)
    assert action_command("proceed", 5.0, spec, 5.0, 0.1) == 2.0
    assert action_command("approach", 10.0, spec, 5.0, 0.1) == 0.0


def test_step_by_step_matches_run(fig2_traces, stop_models):
    sc, traces = fig2_traces
    ctrl, _ = stop_models
    sim = Simulation(sc, ctrl["stop_rule"])
    recs = [sim.step_world() for _ in range(30)]
    assert recs == traces["stop_rule"].steps[:30]
