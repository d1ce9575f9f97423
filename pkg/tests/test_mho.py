from fractions import Fraction

import pytest

from travgen.exact_lp import l1_quotient_norm
from travgen.homology import StratifiedCellComplex, homology
from travgen.homology.models import STRATIFIED, load_model
from travgen.mho import (StratificationDefect, basis_rule_count, build_mho, kernel_red_flags,
                         localized_pd, rank_chain)
from travgen.norms import NormAnnotation

SIMPLICIAL = ["interval_midpoint", "annulus_tangent_circle", "torus_trivial", "torus_meridian",
              "sphere_flag"]


@pytest.mark.parametrize("variant", ["double", "interior"])
@pytest.mark.parametrize("name", sorted(STRATIFIED))
def test_contracts_on_shipped_models(name, variant):
    X = load_model(name)
    m = build_mho(X, variant)
    assert m.check_dd()
    doubled = variant == "double" and bool(X.boundary_cells)
    for j, g in m.groups.items():
        assert g.rank == basis_rule_count(X, j, variant, doubled)
    for d, M in m.differentials.items():
        assert len(M) == m.group(d + 1).rank


def test_trivial_stratification_concentrates_in_top_degree():
    m = build_mho(load_model("torus_trivial"), "double")
    ranks = {g.degree: g.rank for g in m.groups.values()}
    assert ranks == {2: 1, 1: 0, 0: 0}
    assert all(not any(any(r) for r in M) for M in m.differentials.values())


def test_fold_times_circle_codim_one():
    m = build_mho(load_model("fold_times_circle"), "interior")
    assert m.groups[1].rank == 1
    assert m.groups[0].rank == 2


def test_doubled_interval_with_midpoint():
    X = load_model("interval_midpoint")
    m = build_mho(X, "double")
    # two midpoints (one per copy) plus the two glued ends; four open edges
    assert m.groups[1].rank == 4 and m.groups[0].rank == 4
    # each open edge has one midpoint end and one glued end
    for row in m.delta(0):
        assert sorted(abs(x) for x in row) == [0, 0, 1, 1]


def test_double_counts_strata_twice():
    X = load_model("annulus_tangent_circle")
    m = build_mho(X, "double")
    bnd = X.boundary_cells
    interior = [c for c in X.cells if c not in bnd]
    assert m.groups[1].rank == 2 * len(X.stratum_components(1, interior)) + len(X.stratum_components(1, bnd))
    labels = m.groups[1].basis
    assert len(set(labels)) == len(labels)


def test_component_without_relative_class_raises():
    X = StratifiedCellComplex.from_simplices(
        [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)],
        stratum=lambda s: "121" if set(s) <= {0, 1} else "11",
        depth=lambda s: 1 if set(s) <= {0, 1} else 0)
    # a closed arc as the depth-1 locus: one component but H^1 of an arc vanishes
    with pytest.raises(StratificationDefect):
        build_mho(X, "double")


def test_json_dump_lists_bases_and_matrices():
    m = build_mho(load_model("sphere_flag"), "double")
    d = m.to_json()
    assert [g["degree"] for g in d["groups"]] == [0, 1, 2]
    assert all(isinstance(x, int) for e in d["differentials"] for r in e["matrix"] for x in r)


# ---------------------------------------------------------------- localized duality

def test_torus_trivial_operator_is_duality():
    m = build_mho(load_model("torus_trivial"), "double")
    L = localized_pd(m, 0)
    assert L.iso_verified
    assert L.matrix in ([[1]], [[-1]])


def _circle_class(X, verts):
    H = homology(X, 1)
    a, b, c = sorted(verts)
    chain = {f"[{a},{b}]": 1, f"[{b},{c}]": 1, f"[{a},{c}]": -1}
    vec = [chain.get(x, 0) for x in H.cells]
    co = H.coordinates(vec)
    return [co[i] for i in H.free_indices]


def test_torus_meridian_kernel_witness():
    X = load_model("torus_meridian")
    m = build_mho(X, "double")
    L = localized_pd(m, 1)
    assert L.iso_verified
    assert L.rank <= 1
    h = _circle_class(m.total, {0, 3, 6})
    assert any(h)
    assert all(sum(r[k] * h[k] for k in range(len(h))) == 0 for r in L.matrix)
    assert L.image_norm(h) == 0


@pytest.mark.parametrize("variant", ["double", "interior"])
@pytest.mark.parametrize("name", SIMPLICIAL)
def test_localized_operator_contracts(name, variant):
    m = build_mho(load_model(name), variant)
    for j in range(m.dim + 1):
        L = localized_pd(m, j)
        assert L.iso_verified
        # lifts land on the operator through the group map
        for k in range(L.n_homology):
            col = [L.lift[i][k] for i in range(len(L.lift))]
            img = [sum(Fraction(r[i]) * col[i] for i in range(len(col))) for r in L.restriction_from_group]
            assert img == [L.matrix[r][k] for r in range(len(L.matrix))]
        # integer matrix
        assert all(isinstance(x, int) for r in L.matrix for x in r)


def test_non_simplicial_model_is_rejected_for_duality():
    m = build_mho(load_model("fold_times_circle"), "double")
    with pytest.raises(Exception):
        localized_pd(m, 1)


# ---------------------------------------------------------------- annotations

def test_red_flags_and_rank_chain():
    m = build_mho(load_model("torus_meridian"), "double")
    L = localized_pd(m, 1)
    all_zero = NormAnnotation("torus", 1, "amenable", 2, ((1, 0), (0, 1)))
    assert kernel_red_flags(L, all_zero) == []
    nothing_zero = NormAnnotation("torus_fake", 1, "deliberately wrong annotation", 2, ())
    flags = kernel_red_flags(L, nothing_zero)
    assert len(flags) == 1
    chain = rank_chain(m, 1, all_zero, L)
    assert chain.holds and chain.reduced == 0 and chain.image == 1
    assert chain.quotient <= chain.group


def test_quotient_norms_on_complex():
    m = build_mho(load_model("interval_midpoint"), "double")
    Q = m.quotient(0)
    assert Q.ambient_dim == 4
    for i in range(4):
        e = [int(i == k) for k in range(4)]
        assert Q.quotient_norm(e) <= 1
        assert Q.quotient_norm(e) == l1_quotient_norm(e, Q.B)[0]
