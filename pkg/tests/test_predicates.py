import pytest

from corrovv.assertions import PredicateError, format_predicate, parse_predicate
from corrovv.assertions.predicates import Cmp, identifiers, type_of


@pytest.mark.parametrize("text", [
    "speed(ego) <= 0.01 & accel(ego) > 0",
    "!(location() == \"stopped\") | dwell() <= 3",
    "min_gap(ego, *) >= 0",
    "usl(\"free & len >= size(E)\", 4.5, \"ahead\")",
    "once(prev(in_intersection(ego)))",
    "pos(B) - size(B) - pos(ego) > -1",
    "safe_gap & !obs(at_stop_line)",
])
def test_roundtrip(text):
    p = parse_predicate(text)
    assert parse_predicate(format_predicate(p)) == p


def test_single_equals_is_equality():
    assert parse_predicate("speed(ego) = 0") == parse_predicate("speed(ego) == 0")


@pytest.mark.parametrize("text, msg", [
    ("speed(ego)", "bool"),
    ("speed(ego) & true", "bool"),
    ("0 < speed(ego) < 3", "chain"),
    ("usl(location(), 3)", "literal"),
    ("wobble(ego) > 1", "unknown"),
    ("speed() > 1", "argument"),
    ("speed(ego) >", "end of input"),
    ("location() > 1", "cannot compare"),
])
def test_errors(text, msg):
    with pytest.raises(PredicateError, match=msg):
        parse_predicate(text)


def test_error_position():
    with pytest.raises(PredicateError) as e:
        parse_predicate("speed(ego) > > 1")
    assert e.value.position == 13


def test_identifiers_and_types():
    p = parse_predicate("safe_gap & speed(ego) > 0")
    agents, observations = identifiers(p)
    assert agents == {"ego"} and observations == {"safe_gap"}
    assert isinstance(p.right, Cmp)
    assert type_of(p.right.left) == "num"
