# Simulating the junction and checking rule-170 assertions on the traces.

# %%
import numpy as np

from corrovv import data_path
from corrovv.assertions import TraceTable, check_suite, load_assertions, render_text
from corrovv.automata import load_model
from corrovv.simulator import load_scenario, run

scenario = load_scenario(data_path("fig2.scn"))
controllers = {n: load_model(data_path(f"{n}.ta")).automaton for n in ("stop_rule", "stop_rule_faulty", "proceed_regardless")}
traces = {n: run(scenario, a) for n, a in controllers.items()}

# %% Columnar view of the correct run: when does each phase start?
table = TraceTable(traces["stop_rule"])
for loc in ("decelerate", "stopped", "proceed"):
    k = int(np.argmax(table.location == loc))
    print(f"{loc:10s} at t={table.time[k]:4.1f} s, ego pos {table.cols['E']['pos'][k]:.2f} m")

# %% Ego speed profile, one sample per second.
speed = table.cols["E"]["speed"]
print(np.round(speed[::10], 2))

# %%
suite = load_assertions(data_path("ukhc_rule_170.assert"))
for name, trace in traces.items():
    print(f"--- {name}")
    print(render_text(check_suite(trace, suite), max_failures=1))
