# Model checking the stop rule and its rolling-stop variant.

# %%
from corrovv import data_path
from corrovv.automata import export_assumptions, load_model, reachability, replay_witness

prop = load_model(data_path("stop_rule.prop")).property
print("property:", prop.name, "| bad:", prop.to_dict()["bad"])

# %%
for name in ("stop_rule", "stop_rule_faulty", "proceed_regardless"):
    aut = load_model(data_path(f"{name}.ta")).automaton
    verdict = reachability(aut, prop)
    print(f"{name:20s} {verdict.label:6s} ({verdict.explored} symbolic states)")
    if verdict.witness is not None:
        for s in verdict.witness.to_dict(aut)["steps"]:
            print(f"    after {s['delay_s']:.1f} s -> {s['location']}  observations {s['observations']}")
        print("    witness replays:", replay_witness(aut, prop, verdict.witness))

# %% proceed_regardless is formally Safe: the property only asks for a stop,
# not for a gap.  The gap lives in the assumptions the proof relies on.
aut = load_model(data_path("stop_rule.ta")).automaton
for a in export_assumptions(aut, prop):
    print(a.to_dict())
