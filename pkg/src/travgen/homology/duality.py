"""Poincare and Lefschetz duality on simplicial manifolds via the cap product.

The cap uses the Alexander-Whitney front/back face split:
    [v0..vN] cap phi = phi([v0..vp]) [vp..vN]
which needs ordered vertices (``StratifiedCellComplex.is_simplicial``).
"""
from __future__ import annotations

from dataclasses import dataclass

from .cohomology import Subquotient, homology, relative_cohomology, transpose
from .complex import ComplexError, StratifiedCellComplex
from .snf import determinant, matmul, smith_normal_form


class NotAManifold(ComplexError):
    pass


class NonOrientable(ComplexError):
    pass


def _top_incidence(X: StratifiedCellComplex):
    N = X.dim
    count = {c: 0 for c in X.ids(N - 1)}
    for c in X.ids(N):
        for f in X.faces(c):
            count[f] += 1
    return N, count


def manifold_boundary(X: StratifiedCellComplex) -> frozenset:
    """Closure of the codimension-one simplices lying in exactly one top simplex."""
    N, count = _top_incidence(X)
    return X.closure([c for c, k in count.items() if k == 1])


def fundamental_class(X: StratifiedCellComplex, relative: bool = False) -> dict:
    """Fundamental (relative) cycle as {top cell id: coefficient}.

    Checks purity and the pseudomanifold condition, then takes the
    generators of H_N(X) (or H_N(X, dX)); one per component, each
    normalised to a positive first coefficient.  Raises NonOrientable when
    some component carries no top class.
    """
    if not X.is_simplicial:
        raise NotAManifold(["duality needs a simplicial complex with ordered vertices"])
    N, count = _top_incidence(X)
    tops = set(X.ids(N))
    diag = [f"{c!r} is not a face of any top simplex" for c in X.cells
            if X.cells[c].dim < N and not any(True for _ in _cofaces_top(X, c, tops))][:5]
    if diag:
        raise NotAManifold(["complex is not pure: " + d for d in diag])
    allowed = (1, 2) if relative else (2,)
    bad = [c for c, k in count.items() if k not in allowed]
    if bad:
        raise NotAManifold([f"codimension-one cell {c!r} lies in {count[c]} top cells" for c in bad[:5]])
    if not relative and any(k == 1 for k in count.values()):
        raise NotAManifold(["complex has boundary; use the relative class"])
    B = manifold_boundary(X) if relative else frozenset()
    H = homology(X, N, B=B)
    comps = _top_components(X, N)
    if H.rank != len(comps) or H.torsion:
        raise NonOrientable([f"top homology has rank {H.rank} for {len(comps)} components"])
    cyc = {c: 0 for c in X.ids(N)}
    for g in H.generators:
        first = next(v for v in g if v)
        sgn = 1 if first > 0 else -1
        for c, v in zip(H.cells, g):
            cyc[c] += sgn * v
    if any(abs(v) != 1 for v in cyc.values()):
        raise NonOrientable(["top class does not cover every simplex once"])
    return cyc


def _cofaces_top(X, c, tops):
    for t in tops:
        if set(X.cells[c].vertices) <= set(X.cells[t].vertices):
            yield t


def _top_components(X, N):
    parent = {c: c for c in X.ids(N)}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x
    by_face: dict = {}
    for c in X.ids(N):
        for f in X.faces(c):
            by_face.setdefault(f, []).append(c)
    for cs in by_face.values():
        for a in cs[1:]:
            ra, rb = find(a), find(cs[0])
            if ra != rb:
                parent[ra] = rb
    return {find(c) for c in parent}


def cap_chain(X: StratifiedCellComplex, cycle: dict, cochain: dict, p: int) -> dict:
    """Alexander-Whitney cap of an N-chain with a p-cochain -> (N-p)-chain."""
    index = X.vertex_index()
    out: dict = {}
    for c, coef in cycle.items():
        v = X.cells[c].vertices
        front = index[v[: p + 1]]
        val = cochain.get(front, 0)
        if val:
            back = index[v[p:]]
            out[back] = out.get(back, 0) + coef * val
    return out


@dataclass
class DualityMap:
    """Cap with the fundamental class: H^p(X[, dX]) -> H_{N-p}(X)."""
    p: int
    matrix: list[list[int]]          # columns: cohomology generators, rows: homology coords
    cohomology: Subquotient
    homology: Subquotient
    relative: bool

    @property
    def determinant(self) -> int:
        return determinant(self.matrix)

    @property
    def unimodular(self) -> bool:
        return len(self.matrix) == len(self.matrix[0] if self.matrix else []) and \
            abs(self.determinant) == 1

    def inverse(self) -> list[list[int]]:
        if not self.unimodular:
            raise NonOrientable([f"duality matrix in degree {self.p} is not unimodular"])
        s = smith_normal_form(self.matrix)
        # U M V = I  =>  M^-1 = V U
        return matmul(s.V, s.U)


def duality_map(X: StratifiedCellComplex, p: int, relative: bool = False) -> DualityMap:
    """Matrix of the cap map in free generator bases (torsion is dropped)."""
    N = X.dim
    fc = fundamental_class(X, relative)
    base = manifold_boundary(X) if relative else frozenset()
    Hc = relative_cohomology(X, None, base, p)
    Hh = homology(X, N - p)
    cols = []
    for i in Hc.free_indices:
        phi = dict(zip(Hc.cells, Hc.generators[i]))
        ch = cap_chain(X, fc, phi, p)
        vec = [ch.get(c, 0) for c in Hh.cells]
        coords = Hh.coordinates(vec)
        cols.append([coords[k] for k in Hh.free_indices])
    M = transpose(cols, Hh.rank) if cols else [[] for _ in range(Hh.rank)]
    return DualityMap(p, M, Hc, Hh, relative)


def poincare_dual(X: StratifiedCellComplex, homology_class, j: int, relative: bool = False) -> list[int]:
    """Cohomology class in degree N - j dual to a homology class.

    ``homology_class`` is a coordinate vector over the free generators of
    H_j(X).  Returns coordinates over the free generators of H^{N-j}(X)
    (or H^{N-j}(X, dX) when ``relative``), the unique class whose cap with
    the fundamental class is the given one.
    """
    D = duality_map(X, X.dim - j, relative)
    inv = D.inverse()
    return [sum(a * b for a, b in zip(row, homology_class)) for row in inv]


def kronecker(cocycle, cycle) -> int:
    return sum(a * b for a, b in zip(cocycle, cycle))
