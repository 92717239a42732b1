# Formal verdicts and boundary campaigns side by side.

# %%
from corrovv import data_path
from corrovv.automata import load_model
from corrovv.corroboration import campaign_from_binding, detect_conflicts, load_binding, render_report, run_campaign
from corrovv.simulator import load_scenario, run

prop = load_model(data_path("stop_rule.prop")).property
ctrl = {n: load_model(data_path(f"{n}.ta")).automaton for n in ("stop_rule", "stop_rule_faulty", "proceed_regardless")}

# %% One campaign per controller on the junction scenario.
fig2 = load_scenario(data_path("fig2.scn"))
for name, aut in ctrl.items():
    b = load_binding(data_path("stop_rule.bind"), aut, prop)
    rep = run_campaign(b, campaign_from_binding(b, fig2))
    print(f"{name:20s} formal {rep.formal.label:6s} -> {rep.status}")

# %% The gap boundary: a controller that ignores the gap is caught only just
# below the threshold.
gap_join = load_scenario(data_path("gap_join.scn"))
b = load_binding(data_path("stop_rule.bind"), ctrl["proceed_regardless"], prop)
rep = run_campaign(b, campaign_from_binding(b, gap_join))
for o in rep.outcomes:
    print(o.trial.parameters, o.trial.labels, o.verdict)
print(render_report(rep, "md"))

# %% Two rules that disagree: stop before the junction, keep off the crossing.
b = load_binding(data_path("stop_rule.bind"), ctrl["stop_rule"], prop)
keep = load_binding(data_path("keep_clear.bind"))
trace = run(load_scenario(data_path("crossing_conflict.scn")), ctrl["stop_rule"])
for f in detect_conflicts([b, keep], [("crossing_conflict", trace)]):
    print(f.properties, f.demands, f"steps {f.steps[0]}..{f.steps[-1]}", "obeyed:", set(f.obeyed))
