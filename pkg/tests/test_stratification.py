import numpy as np
import pytest

from travgen.flow import FieldSpec, FlowSystem, ImplicitDomain, geodesic_field
from travgen.stratification import (AtlasHoles, MissingAnnotation, RankValue, build_atlas,
                                    check_k_convexity, convexity_obstruction, filtration,
                                    morse_bound_report, refinement_stability)

from oracles import annulus_chord_type

DISK = "x^2 + y^2 - 1"
ANNULUS = "(x^2 + y^2 - 1)*(x^2 + y^2 - 4)"


@pytest.fixture(scope="module")
def disk_sys():
    d = ImplicitDomain(DISK, bbox=[(-1.2, 1.2)] * 2)
    return FlowSystem(d, geodesic_field("1", d))


@pytest.fixture(scope="module")
def annulus_sys():
    d = ImplicitDomain(ANNULUS, bbox=[(-2.2, 2.2)] * 2)
    return FlowSystem(d, geodesic_field("1", d))


@pytest.fixture(scope="module")
def disk_atlas(disk_sys):
    return build_atlas(disk_sys, 100, 25)


@pytest.fixture(scope="module")
def annulus_atlas(annulus_sys):
    return build_atlas(annulus_sys, 100, 25)


def _oracle_patterns(atlas):
    out = []
    for s in atlas.states:
        p, _ = annulus_chord_type(s[:2], [np.cos(s[2]), np.sin(s[2])], band=1e-6)
        out.append(p)
    return out


# ---------------------------------------------------------------- atlas

def test_disk_patterns(disk_atlas):
    assert set(disk_atlas.count_map()) == {"11", "2"}
    assert disk_atlas.count_map() == {"11": 1, "2": 2}
    assert disk_atlas.failed_fraction == 0.0


def test_annulus_patterns_match_chord_oracle(annulus_atlas):
    assert set(annulus_atlas.count_map()) == {"11", "2", "121"}
    assert annulus_atlas.patterns == _oracle_patterns(annulus_atlas)


def test_annulus_counts(annulus_atlas):
    assert annulus_atlas.count_map() == {"11": 4, "2": 2, "121": 2}
    rows = {r.pattern: r for r in annulus_atlas.counts()}
    assert rows["121"].codim == 1 and rows["11"].codim == 0
    # every codimension fits inside the 2-dimensional trajectory space
    assert all(r.codim <= annulus_atlas.trajectory_dim for r in rows.values())


def test_components_partition_same_pattern_nodes(annulus_atlas):
    comp = annulus_atlas.component
    pats = annulus_atlas.component_patterns()
    for i, p in enumerate(annulus_atlas.patterns):
        assert comp[i] >= 0 and pats[comp[i]] == p


@pytest.mark.parametrize("which", ["disk_sys", "annulus_sys"])
def test_counts_stable_under_refinement(which, request):
    stable, a, b = refinement_stability(request.getfixturevalue(which), 100, 25)
    assert stable, (a.count_map(), b.count_map())


def test_holes_over_threshold_raise(annulus_sys):
    with pytest.raises(AtlasHoles):
        build_atlas(annulus_sys, 40, 9, max_failed=-1.0)


def test_explicit_field_atlas():
    d = ImplicitDomain(DISK, bbox=[(-1.2, 1.2)] * 2)
    atlas = build_atlas(FlowSystem(d, FieldSpec.explicit(["1", "0"])), 200)
    assert atlas.kind == "explicit"
    assert atlas.count_map() == {"11": 1, "2": 2}


# ---------------------------------------------------------------- convexity

def test_disk_two_convex(disk_atlas):
    assert check_k_convexity(disk_atlas, 2).convex


def test_annulus_convexity(annulus_atlas):
    assert check_k_convexity(annulus_atlas, 2).convex
    res = check_k_convexity(annulus_atlas, 1)
    assert not res.convex and res.witnesses
    for pattern, state in res.witnesses:
        want, gap = annulus_chord_type(state[:2], [np.cos(state[2]), np.sin(state[2])], band=1e-6)
        assert pattern == want and pattern in {"2", "121"}


# ---------------------------------------------------------------- bounds

def test_bound_single_quadruple_component():
    rec = morse_bound_report({(1, 2, 2, 1): 1}, 2, rhs_m=RankValue(0, "test"))
    assert rec.lhs1 == 4 and rec.satisfied


def test_bound_second_display():
    rec = morse_bound_report({(1, 2, 1): 1, (1, 2, 2, 1): 1}, 1, rhs_dm=RankValue(9, "test"))
    assert rec.lhs1 == 3 and rec.lhs2 == 9
    assert rec.satisfied_dm is True and rec.satisfied_m is None
    assert isinstance(rec.lhs2, int)


def test_bound_annulus_amenable(annulus_atlas):
    zero = RankValue(0, "amenable fundamental group")
    rec = morse_bound_report(annulus_atlas, 1, rhs_m=zero, rhs_dm=zero)
    # |(2)|' = |(1,2,1)|' = 1: sup 1 * 2 components + sup 3 * 2 components
    assert rec.lhs1 == 8 and rec.satisfied
    assert rec.to_dict()["rhs_m"]["provenance"] == "amenable fundamental group"


def test_bound_requires_annotation():
    with pytest.raises(MissingAnnotation):
        morse_bound_report({(1, 1): 1}, 0)
    with pytest.raises(MissingAnnotation):
        RankValue(1, " ")
    with pytest.raises(ValueError):
        RankValue(-1, "x")


def test_bound_violation_reported():
    rec = morse_bound_report({(1, 2, 1): 1}, 1, rhs_m=RankValue(5, "test"))
    assert rec.satisfied_m is False and not rec.satisfied


def test_convexity_obstruction(disk_atlas):
    flagged = convexity_obstruction(disk_atlas, 2, {"H2": RankValue(1, "test")})
    assert flagged.max_codim == 1 and flagged.j_convex and flagged.flagged
    quiet = convexity_obstruction(disk_atlas, 1, {"H1": RankValue(1, "test")})
    assert not quiet.flagged
    with pytest.raises(MissingAnnotation):
        convexity_obstruction(disk_atlas, 1, {})


# ---------------------------------------------------------------- filtration

def test_disk_depth_two_empty(disk_atlas):
    f = filtration(disk_atlas)
    assert not f.interior[2].any()
    assert f.nested()


def test_annulus_depth_one_mask(annulus_atlas):
    f = filtration(annulus_atlas)
    oracle = np.array([p != "11" for p in _oracle_patterns(annulus_atlas)])
    want = oracle | annulus_atlas.tangent_entry
    assert np.array_equal(f.full[1, 0], want)
    assert f.nested()


def test_doubled_filtration_invariant(annulus_atlas):
    f = filtration(annulus_atlas, doubled=True)
    assert f.interior.shape[1] == 2
    assert f.nested() and f.involution_invariant()
