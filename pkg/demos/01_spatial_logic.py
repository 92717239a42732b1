# Spatial formulas on the stop-sign junction.
#
# Run with:  python3 demos/01_spatial_logic.py

# %%
from corrovv import data_path
from corrovv import logic as L
from corrovv.simulator import load_scenario
from corrovv.traffic import free_intervals, occupied_intervals, view_ahead, view_from_rear

scenario = load_scenario(data_path("fig2.scn"))
snap = scenario.initial_snapshot()
for r in snap.reservations:
    print(f"{r.agent}: lane {r.lane}, reservation [{r.lo:g}, {r.hi:g}]")

# %% The cyclist M sits inside the junction, so the main lane's whole
# junction stretch counts as occupied.
print("occupied on main:", occupied_intervals(snap, "main"))

# %% Move the ego to the stop line and ask whether it may go.
from dataclasses import replace

ego = replace(snap.agent("E"), pos=47.5, speed=0.0)
at_line = replace(snap, agents=(ego,) + tuple(a for a in snap.agents if a.id != "E"))
view = view_from_rear(at_line, "E", ego.size)
formula = L.parse_formula("re(E) ; sg(E)")
print("view", view.extent, "free parts", free_intervals(at_line, view))
print("re(E) ; sg(E) with M in the junction:", L.evaluate(at_line, view, formula))
print("... after M has left:", L.evaluate(at_line.without("M"), view, formula))

# %% Chop is decided on a finite set of split points.
pts = L.candidate_chop_points(at_line, view, formula)
print(len(pts), "candidate points:", [round(p, 3) for p in pts])

# %% The safe-gap threshold is inclusive.
print("ahead view of 4.5 m:", view_ahead(at_line.without("M"), "E", 4.5).extent)
for gap in (4.4, 4.5, 4.6):
    v = view_ahead(at_line.without("M"), "E", gap)
    print(f"gap {gap}: sg(E) = {L.evaluate(at_line.without('M'), v, 'sg(E)')}")
