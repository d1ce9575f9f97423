import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from travgen.omega import (InadmissiblePattern, Pattern, as_pattern, degenerates_to,
                           elementary_degenerations, enumerate_patterns, format_pattern,
                           generic_neighbours, hasse_diagram, norm, parse_pattern, reduced_norm,
                           sup_count)

from oracles import brute_admissible, root_splitting_neighbours


def P(*e):
    return Pattern(e)


@pytest.mark.parametrize("omega,n,rn,s", [
    ((1, 2, 2, 1), 6, 2, 4),
    ((2,), 2, 1, 1),
    ((1, 3), 4, 2, 2),
    ((3, 1), 4, 2, 2),
    ((1, 1), 2, 0, 2),
])
def test_norms(omega, n, rn, s):
    assert norm(omega) == n
    assert reduced_norm(omega) == rn
    assert sup_count(omega) == s


@pytest.mark.parametrize("bad,word", [
    ((1,), "even"),
    ((2, 1), "first"),
    ((1, 2), "last"),
    ((1, 1, 1), "interior"),
    ((), "empty"),
    ((0, 1), ">= 1"),
])
def test_inadmissible_diagnostics(bad, word):
    with pytest.raises(InadmissiblePattern, match=word):
        norm(bad)


def test_enumerate_small_bounds():
    assert enumerate_patterns(0) == [P(1, 1)]
    assert set(enumerate_patterns(1)) == {P(1, 1), P(2), P(1, 2, 1)}
    two = enumerate_patterns(2)
    assert set(two) == {P(1, 1), P(2), P(1, 2, 1), P(1, 2, 2, 1), P(1, 3), P(3, 1)}
    assert {p for p in two if p.reduced_norm == 2} == {P(1, 2, 2, 1), P(1, 3), P(3, 1)}


@pytest.mark.parametrize("bound", range(0, 5))
def test_enumerate_matches_brute_force(bound):
    got = enumerate_patterns(bound)
    assert {p.entries for p in got} == brute_admissible(bound)
    keys = [(p.reduced_norm, p.norm, p.entries) for p in got]
    assert keys == sorted(keys)


def test_enumerate_nested():
    for b in range(5):
        assert set(enumerate_patterns(b)) <= set(enumerate_patterns(b + 1))


def test_norm_parity_rule():
    # admissible patterns have even norm: odd ends, even interior
    for p in enumerate_patterns(5):
        assert p.norm % 2 == 0
        assert (p.norm - p.sup) % 2 == p.reduced_norm % 2


def test_serialization_round_trip():
    assert format_pattern(P(1, 2, 2, 1)) == "1221"
    assert format_pattern(P(1, 12, 1)) == "(1,12,1)"
    assert parse_pattern("(1,12,1)") == P(1, 12, 1)
    assert as_pattern("121") == P(1, 2, 1)
    with pytest.raises(ValueError):
        parse_pattern("1,2")


def test_elementary_degenerations_examples():
    assert elementary_degenerations((1, 1)) == {P(2), P(3, 1), P(1, 3), P(1, 2, 1)}
    assert elementary_degenerations((2,)) == {P(4)}
    got = elementary_degenerations((1, 2, 1))
    assert P(1, 4, 1) in got and P(1, 2, 2, 1) in got
    assert all(q.reduced_norm > 1 for q in got)


def test_degenerates_to_examples():
    assert degenerates_to((1, 1), (2,))
    assert degenerates_to((1, 1), (1, 2, 1))
    assert not degenerates_to((2,), (1, 2, 1))
    assert degenerates_to((1, 2, 1), (1, 2, 1))


@pytest.mark.parametrize("omega", [p.entries for p in enumerate_patterns(3) if p.norm <= 8])
def test_generic_neighbours_match_root_splitting(omega):
    assert {q.entries for q in generic_neighbours(omega)} == root_splitting_neighbours(omega)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(enumerate_patterns(3)), st.sampled_from(enumerate_patterns(3)))
def test_degeneration_monotone_in_reduced_norm(a, b):
    if degenerates_to(a, b) and a != b:
        assert b.reduced_norm > a.reduced_norm
        assert not degenerates_to(b, a)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(enumerate_patterns(2)), st.sampled_from(enumerate_patterns(2)),
       st.sampled_from(enumerate_patterns(2)))
def test_degeneration_transitive(a, b, c):
    if degenerates_to(a, b) and degenerates_to(b, c):
        assert degenerates_to(a, c)


def test_hasse_small():
    d0 = hasse_diagram(0)
    assert d0.nodes == [P(1, 1)] and d0.edges == []
    d1 = hasse_diagram(1)
    named = {(str(d1.nodes[i]), str(d1.nodes[j])) for i, j in d1.edges}
    assert named == {("11", "2"), ("11", "121")}
    assert len(hasse_diagram(2).nodes) == 6


def test_hasse_edges_raise_reduced_norm_and_export():
    d = hasse_diagram(3)
    for i, j in d.edges:
        assert d.nodes[j].reduced_norm > d.nodes[i].reduced_norm
    doc = json.loads(d.to_json())
    assert len(doc["nodes"]) == len(d.nodes) and doc["edges"]
    assert d.to_dot().startswith("digraph")
