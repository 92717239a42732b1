import random

import pytest

from corrovv import logic as L
from corrovv.traffic import Agent, RoadNetwork, Snapshot, View
from generators import random_formula, random_scene, random_view
from oracles import grid_evaluate


@pytest.fixture
def scene():
    n = RoadNetwork(("a", "b"), 100.0, signs=(), crossings=())
    return Snapshot(n, (Agent("E", "a", 20.0, 4.5, speed=10.0, aut=True), Agent("M", "a", 50.0, 2.0, kind="cyclist")))


def test_parse_roundtrip():
    for text in ["free", "re(E) ; sg(E)", "!free & len >= 3", "len < size(E) + 1", "aut(E)=1 | crossing",
                 "sign(give-way) ; (free ; re(M))"]:
        f = L.parse_formula(text)
        assert L.parse_formula(L.format_formula(f)) == f


def test_precedence():
    f = L.parse_formula("free | free & crossing ; free")
    assert isinstance(f, L.Chop)
    assert isinstance(f.left, L.Or)
    assert isinstance(f.left.right, L.And)


def test_syntax_errors_carry_position():
    with pytest.raises(L.FormulaSyntaxError) as e:
        L.parse_formula("free & ")
    assert "end of input" in str(e.value)
    with pytest.raises(L.FormulaSyntaxError):
        L.parse_formula("sign(yield)")
    with pytest.raises(L.FormulaSyntaxError):
        L.parse_formula("aut(E)=2")


def test_definitions_expand_and_substitute():
    f = L.parse_formula("sg(M)")
    assert f == L.safe_gap("M")
    defs = L.parse_definitions("gap2(X) := free & len >= size(X) + 2\nboth(X, Y) := gap2(X) ; gap2(Y)")
    g = L.parse_formula("both(E, M)", defs)
    assert L.agents_in(g) == {"E", "M"}
    with pytest.raises(ValueError, match="reserved"):
        L.parse_definitions("free := crossing")


def test_basic_atoms(scene):
    assert L.evaluate(scene, View("a", (30.0, 40.0)), "free")
    assert not L.evaluate(scene, View("a", (29.0, 40.0)), "free")
    assert L.evaluate(scene, View("a", (15.5, 30.0)), "re(E)")
    assert L.evaluate(scene, View("a", (0.0, 1.0)), "aut(E)=1 & aut(M)=0")
    assert L.evaluate(scene, View("a", (30.0, 34.5)), "len >= size(E)")
    assert not L.evaluate(scene, View("a", (30.0, 34.4)), "len >= size(E)")


def test_chop_finds_split(scene):
    # Reservation of E then a free stretch of at least its length.
    assert L.evaluate(scene, View("a", (15.5, 40.0)), "re(E) ; sg(E)")
    assert not L.evaluate(scene, View("a", (15.5, 34.0)), "re(E) ; sg(E)")


def test_unresolved_agent(scene):
    with pytest.raises(L.UnresolvedAgentError):
        L.evaluate(scene, View("a", (0.0, 10.0)), "re(Z)")


def test_view_outside_network(scene):
    with pytest.raises(Exception, match="outside network"):
        L.evaluate(scene, View("a", (0.0, 120.0)), "free")


def test_candidate_points_cover_boundaries(scene):
    pts = L.candidate_chop_points(scene, View("a", (10.0, 60.0)))
    for p in (10.0, 15.5, 30.0, 48.0, 50.0, 60.0):
        assert any(abs(p - q) < 1e-9 for q in pts)


@pytest.mark.parametrize("seed", range(60))
def test_matches_grid_oracle(seed):
    rng = random.Random(seed)
    snap = random_scene(rng)
    ids = [a.id for a in snap.agents] or ["A0"]
    if not snap.agents:
        snap = Snapshot(snap.network, (Agent("A0", snap.network.lanes[0], 1.0, 1.0),))
    view = random_view(rng, snap)
    f = random_formula(rng, ids)
    assert L.evaluate(snap, view, f) == grid_evaluate(snap, view, f)
