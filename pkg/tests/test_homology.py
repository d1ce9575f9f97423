import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from travgen.homology import (ComplexError, NotAManifold, StratifiedCellComplex, betti_numbers,
                              connecting_hom, duality_map, homology, les_check, poincare_dual,
                              relative_cohomology, restriction, smith_normal_form)
from travgen.homology.models import CLASSICAL, STRATIFIED, annulus, circle, disk, interval, load_model
from travgen.homology.snf import determinant, identity, kernel_basis, matmul

from oracles import random_triple, rank_mod_p, rational_rank, relative_betti, vertex_tuples


# ---------------------------------------------------------------- Smith normal form

def test_snf_small_examples():
    assert smith_normal_form([[2, 4], [6, 8]]).diagonal == [2, 4]
    assert smith_normal_form(identity(3)).diagonal == [1, 1, 1]
    z = smith_normal_form([[0, 0], [0, 0], [0, 0]])
    assert z.diagonal == [] and z.rank == 0


def test_snf_torsion_and_kernel():
    s = smith_normal_form([[2, 0], [0, 3]])
    assert s.diagonal == [1, 6] and s.torsion == [6]
    A = [[1, 2, 3], [2, 4, 6]]
    K = kernel_basis(A)
    assert len(K) == 2
    assert all(sum(a * x for a, x in zip(row, k)) == 0 for row in A for k in K)


matrices = st.integers(1, 5).flatmap(
    lambda m: st.integers(1, 5).flatmap(
        lambda n: st.lists(st.lists(st.integers(-6, 6), min_size=n, max_size=n), min_size=m, max_size=m)))


@settings(max_examples=150, deadline=None)
@given(matrices)
def test_snf_transforms_are_unimodular_and_reproduce(A):
    s = smith_normal_form(A)
    assert s.verify(A)
    assert abs(determinant(s.U)) == 1 and abs(determinant(s.V)) == 1
    assert s.rank == rational_rank(A)


# ---------------------------------------------------------------- homology of the models

@pytest.mark.parametrize("name,expected", [
    ("interval", [1, 0]), ("circle", [1, 1]), ("disk", [1, 0, 0]), ("annulus", [1, 1, 0]),
    ("torus", [1, 2, 1]), ("sphere", [1, 0, 1]), ("projective_plane", [1, 0, 0]),
])
def test_betti_numbers(name, expected):
    X = load_model(name)
    assert betti_numbers(X) == expected
    tops = [c.vertices for c in X.cells.values() if c.dim == X.dim]
    assert relative_betti(tops) == expected


def test_projective_plane_torsion():
    X = load_model("projective_plane")
    H1 = homology(X, 1)
    assert H1.rank == 0 and H1.torsion == [2]
    assert homology(X, 1, coefficients="rationals").rank == 0


@pytest.mark.parametrize("name", sorted(CLASSICAL) + sorted(STRATIFIED))
def test_euler_characteristic_and_dd(name):
    X = load_model(name)
    b = betti_numbers(X)
    assert sum((-1) ** q * v for q, v in enumerate(b)) == X.euler_characteristic()
    for q in range(1, X.dim + 1):
        d1 = X.boundary_matrix(q, X.ids(q - 1), X.ids(q))
        if q + 1 <= X.dim:
            d2 = X.boundary_matrix(q + 1, X.ids(q), X.ids(q + 1))
            assert not any(any(r) for r in matmul(d1, d2))


def test_boundary_ranks_match_mod_p():
    X = load_model("torus")
    for q in (1, 2):
        M = X.boundary_matrix(q, X.ids(q - 1), X.ids(q))
        assert smith_normal_form(M).rank == rank_mod_p(M)


# ---------------------------------------------------------------- relative cohomology

def test_relative_cohomology_examples():
    D = disk()
    S = D.boundary_cells
    assert relative_cohomology(D, None, S, 2).rank == 1
    for q in range(3):
        H = relative_cohomology(D, None, D.all_ids, q)
        assert H.rank == 0 and not H.torsion
    I = interval()
    assert relative_cohomology(I, None, I.boundary_cells, 1).rank == 1


def test_relative_cohomology_rejects_non_subcomplex():
    D = disk()
    with pytest.raises(ComplexError):
        relative_cohomology(D, None, frozenset({"[0,1]"}), 1)


def test_cocycle_basis_is_closed():
    X = load_model("torus")
    H = relative_cohomology(X, None, frozenset(), 1)
    d = X.boundary_matrix(2, H.cells, X.ids(2))
    for g in H.generators:
        assert all(sum(g[i] * d[i][j] for i in range(len(g))) == 0 for j in range(len(d[0])))


# ---------------------------------------------------------------- connecting maps and exactness

def test_connecting_map_disk_circle():
    D = disk()
    S = D.boundary_cells
    delta = connecting_hom(D, D.all_ids, S, frozenset(), 1)
    assert delta.matrix in ([[1]], [[-1]])


def test_connecting_map_of_degenerate_triple_is_zero():
    X = load_model("torus")
    C = X.closure(["[0,1]"])
    for q in range(2):
        delta = connecting_hom(X, X.all_ids, X.all_ids, C, q)
        assert not any(any(r) for r in delta.matrix)


def test_les_exact_on_random_triples():
    rng = random.Random(20240611)
    for _ in range(100):
        X, A, B, C = random_triple(rng)
        nodes = les_check(X, A, B, C)
        assert all(n["exact"] for n in nodes), nodes
        # independent rank identity: rank delta_q = dim H^q(B,C) - rank(H^q(A,C) -> H^q(B,C))
        tops_B = vertex_tuples(X, B)
        bB = relative_betti(tops_B, vertex_tuples(X, C), q_max=X.dim) if B else [0] * (X.dim + 1)
        for q in range(X.dim + 1):
            res = restriction(X, (A, C), (B, C), q).rational_rank()
            delta = connecting_hom(X, A, B, C, q).rational_rank()
            assert delta == bB[q] - res


# ---------------------------------------------------------------- doubling

def test_double_interval_is_circle():
    D, inv = interval().double()
    assert betti_numbers(D) == [1, 1]


def test_double_annulus_is_torus():
    A = annulus()
    D, inv = A.double()
    assert betti_numbers(D) == [1, 2, 1]
    assert D.is_simplicial


@pytest.mark.parametrize("name", ["interval", "disk", "annulus", "interval_midpoint",
                                  "annulus_tangent_circle", "fold_times_circle"])
def test_double_euler_and_involution(name):
    X = load_model(name)
    bnd = X.boundary_cells
    D, inv = X.double()
    assert D.euler_characteristic() == 2 * X.euler_characteristic() - X.euler_characteristic(bnd)
    assert all(inv[inv[c]] == c for c in D.cells)
    assert {c for c in D.cells if inv[c] == c} == set(bnd)
    # cellular: faces go to faces with the same incidence
    for c, cell in D.cells.items():
        img = sorted((inv[f], s) for f, s in cell.boundary)
        assert img == sorted(D.cells[inv[c]].boundary)


# ---------------------------------------------------------------- duality

def _pair(coh, coh_coords, hom, hom_index):
    cochain = {}
    for k, i in enumerate(coh.free_indices):
        for c, v in zip(coh.cells, coh.generators[i]):
            cochain[c] = cochain.get(c, 0) + coh_coords[k] * v
    chain = dict(zip(hom.cells, hom.generators[hom.free_indices[hom_index]]))
    return sum(cochain.get(c, 0) * v for c, v in chain.items())


def test_torus_duality_unimodular():
    X = load_model("torus")
    D = duality_map(X, 1)
    assert D.unimodular and abs(D.determinant) == 1
    assert matmul(D.matrix, D.inverse()) == identity(2)
    assert matmul(D.inverse(), D.matrix) == identity(2)


def test_torus_intersection_form():
    X = load_model("torus")
    D = duality_map(X, 1)
    a = poincare_dual(X, [1, 0], 1)
    assert _pair(D.cohomology, a, D.homology, 0) == 0
    assert abs(_pair(D.cohomology, a, D.homology, 1)) == 1


def test_sphere_point_dual_is_top_generator():
    X = load_model("sphere")
    assert poincare_dual(X, [1], 0) in ([1], [-1])
    assert duality_map(X, 2).unimodular


def test_relative_duality_on_annulus():
    A = annulus()
    for p in range(3):
        assert duality_map(A, p, relative=True).unimodular


def test_duality_rejects_non_manifold():
    X = StratifiedCellComplex.from_simplices([(0, 1, 2), (0, 1, 3), (0, 1, 4)])
    with pytest.raises(NotAManifold):
        duality_map(X, 1)


def test_double_annulus_duality():
    D, _ = annulus().double()
    for p in range(3):
        assert duality_map(D, p).unimodular


# ---------------------------------------------------------------- files and validation

def test_json_round_trip():
    X = load_model("sphere_flag")
    Y = StratifiedCellComplex.loads(X.dumps())
    assert sorted(Y.cells) == sorted(X.cells)
    assert betti_numbers(Y) == betti_numbers(X)
    assert all(Y.cells[c].depth == X.cells[c].depth and Y.cells[c].stratum == X.cells[c].stratum
               for c in X.cells)


def test_json_diagnostics_name_the_line():
    data = json.loads(disk().dumps())
    for cell in data["cells"]:
        if cell["id"] == "[0,1,2]":
            cell["boundary"][0][1] *= -1
    text = json.dumps(data, indent=1)
    with pytest.raises(ComplexError) as e:
        StratifiedCellComplex.loads(text)
    assert any("line" in d for d in e.value.diagnostics)


def test_json_syntax_error_reports_line():
    with pytest.raises(ComplexError) as e:
        StratifiedCellComplex.loads('{"cells": [\n{"id": "a", "dim": 0,,}]}')
    assert e.value.diagnostics[0].startswith("line 2")


def test_unknown_face_rejected():
    with pytest.raises(ComplexError):
        StratifiedCellComplex.loads(json.dumps({"cells": [
            {"id": "e", "dim": 1, "boundary": [["v", 1]], "stratum": "11", "depth": 0}]}))


def test_product_is_a_complex():
    X = interval().product(circle())
    assert betti_numbers(X) == [1, 1, 0]
    Y = circle().product(circle())
    assert betti_numbers(Y) == [1, 2, 1]
