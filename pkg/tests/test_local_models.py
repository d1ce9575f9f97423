import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from travgen.local_models import (IllConditioned, ModelPolynomial, boundary_local_model,
                                  evaluate, reachable_patterns, real_roots, trajectories_at)
from travgen.omega import Pattern, enumerate_patterns, generic_neighbours, is_admissible


def test_evaluate_examples():
    assert evaluate(ModelPolynomial.from_pattern((2,), {(1, 0): 0.0}), 1.0) == 0.0
    assert evaluate(ModelPolynomial.from_pattern((2,), {(1, 0): -0.25}), 1.0) == pytest.approx(-0.25)
    assert evaluate(ModelPolynomial.from_pattern((1, 2, 1)), 2.0) == 0.0


def test_evaluate_matches_expanded_product():
    m = ModelPolynomial.from_pattern((1, 2, 1), {(2, 0): -0.01})
    u = np.linspace(0, 4, 9)
    want = (u - 1) * ((u - 2) ** 2 - 0.01) * (u - 3)
    assert np.allclose(evaluate(m, u), want)


def test_unknown_deformation_key():
    with pytest.raises(KeyError):
        ModelPolynomial.from_pattern((2,), {(1, 1): 0.1})


def test_json_round_trip():
    m = ModelPolynomial.from_pattern((1, 2, 1), {(2, 0): -0.02})
    back = ModelPolynomial.from_json(m.to_json())
    assert back == m


def test_coordinate_count_is_reduced_norm():
    for p in enumerate_patterns(3):
        assert ModelPolynomial.from_pattern(p).n_coordinates == p.reduced_norm


def test_trajectories_examples():
    d = trajectories_at(ModelPolynomial.from_pattern((1, 2, 2, 1)))
    assert d.patterns == [Pattern((1, 2, 2, 1))]
    assert (d.trajectories[0].left, d.trajectories[0].right) == pytest.approx((1.0, 4.0))

    d = trajectories_at(ModelPolynomial.from_pattern((2,), {(1, 0): -0.01}))
    assert d.patterns == [Pattern((1, 1))]
    assert (d.trajectories[0].left, d.trajectories[0].right) == pytest.approx((0.9, 1.1))

    d = trajectories_at(ModelPolynomial.from_pattern((2,), {(1, 0): 0.01}))
    assert d.trajectories == []


@pytest.mark.parametrize("omega", [p for p in enumerate_patterns(4) if p.norm <= 6])
def test_centre_gives_single_trajectory(omega):
    d = trajectories_at(ModelPolynomial.from_pattern(omega))
    assert d.patterns == [omega]


def test_boundary_local_model_examples():
    m = boundary_local_model(2)
    assert evaluate(m, 0.3) == pytest.approx(0.09)
    m = boundary_local_model(3, (0.0, -0.03))
    roots = [r.u for r in real_roots(m)]
    assert roots == pytest.approx([-math.sqrt(0.03), 0.0, math.sqrt(0.03)], abs=1e-12)
    m = boundary_local_model(1)
    assert m.n_coordinates == 0 and m.pattern is None


def test_ambiguous_cluster_raises():
    tol = 1e-4
    # roots at +-tol/2 are tol apart: inside the [tol/2, 2 tol] ambiguity window
    m = boundary_local_model(2, (-(tol / 2) ** 2,))
    with pytest.raises(IllConditioned):
        trajectories_at(m, tol)


@settings(max_examples=80, deadline=None)
@given(st.sampled_from([p for p in enumerate_patterns(3) if p.norm <= 6]), st.data())
def test_emitted_patterns_admissible(omega, data):
    keys = [(i, l) for i, j in enumerate(omega.entries, start=1) for l in range(j - 1)]
    vals = data.draw(st.lists(st.floats(-0.1, 0.1), min_size=len(keys), max_size=len(keys)))
    m = ModelPolynomial.from_pattern(omega, dict(zip(keys, vals)))
    try:
        d = trajectories_at(m, 1e-3)
    except IllConditioned:
        return
    for t in d.trajectories:
        assert is_admissible(t.pattern.entries)
    lefts = [t.left for t in d.trajectories]
    assert lefts == sorted(lefts)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-0.2, 0.2), min_size=3, max_size=3))
def test_real_roots_parity(coeffs):
    m = boundary_local_model(4, coeffs)
    try:
        roots = real_roots(m, 1e-3)
    except IllConditioned:
        return
    assert (m.degree - sum(r.multiplicity for r in roots)) % 2 == 0


def test_reachable_examples():
    assert reachable_patterns((2,), 0.1, 1000) == {Pattern((2,)), Pattern((1, 1))}
    assert reachable_patterns((1, 2, 1), 0.1, 10_000) == {Pattern((1, 2, 1)), Pattern((1, 1))}
    assert reachable_patterns((1, 1), 0.1, 10) == {Pattern((1, 1))}


def test_reachable_records_sampling():
    r = reachable_patterns((1, 3), 0.1, 500, seed=3)
    assert r.budget == 500 and r.seed == 3 and r.n_samples == 500


@pytest.mark.parametrize("omega", [(1, 3), (3, 1), (1, 2, 2, 1), (4,)])
def test_reachable_agrees_with_order(omega):
    assert set(reachable_patterns(omega, 0.1, 3000)) == generic_neighbours(omega)


def test_radius_restricted():
    with pytest.raises(ValueError):
        reachable_patterns((2,), 0.5, 10)
