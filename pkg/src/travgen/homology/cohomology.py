"""Integer (co)homology of cell complexes and pairs, with explicit bases.

Every group is computed as ker E / im D for integer matrices with E D = 0.
The result keeps representative vectors (cycles or cocycles in the ambient
chain group) and a coordinate map, so induced maps, restrictions and
connecting homomorphisms come out as integer matrices in those bases.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .complex import ComplexError, StratifiedCellComplex
from .snf import matvec, smith_normal_form, transpose


@dataclass
class Subquotient:
    """ker E / im D with generators; ``orders[i]`` is 0 (free) or d > 1 (Z/d)."""
    cells: list[str]                 # basis of the ambient group
    generators: list[list[int]]
    orders: list[int]
    _Vinv_tail: list[list[int]] = field(repr=False, default_factory=list)
    _U2: list[list[int]] = field(repr=False, default_factory=list)
    _skip: int = 0                   # number of trivial (order 1) generators dropped
    _kernel: list[list[int]] = field(repr=False, default_factory=list)
    _orders_full: list[int] | None = field(repr=False, default=None)
    _keep: list[int] | None = field(repr=False, default=None)

    @property
    def rank(self) -> int:
        return sum(1 for o in self.orders if o == 0)

    @property
    def torsion(self) -> list[int]:
        return [o for o in self.orders if o > 1]

    @property
    def free_indices(self) -> list[int]:
        return [i for i, o in enumerate(self.orders) if o == 0]

    def in_kernel(self, vec) -> bool:
        return len(self._kernel) == 0 or not any(matvec(self._kernel, vec))

    def coordinates(self, vec) -> list[int]:
        """Coordinates of a (co)cycle in the generator basis.

        Torsion coordinates are reduced mod their order.  Raises ValueError
        if the vector is not a (co)cycle.
        """
        vec = [int(v) for v in vec]
        if len(vec) != len(self.cells):
            raise ValueError("vector length does not match the cell basis")
        if not self.in_kernel(vec):
            raise ValueError("vector is not closed")
        # coordinates in the kernel basis, then in the SNF-adapted basis
        y = matvec(self._Vinv_tail, vec) if self._Vinv_tail else []
        x = matvec(self._U2, y) if self._U2 else y
        x = x[self._skip:]
        orders = self.orders if self._orders_full is None else self._orders_full
        x = [xi % o if o > 1 else xi for xi, o in zip(x, orders)]
        return x if self._keep is None else [x[i] for i in self._keep]

    def free_coordinates(self, vec) -> list[int]:
        c = self.coordinates(vec)
        return [c[i] for i in self.free_indices]

    def is_zero(self, vec) -> bool:
        return not any(self.coordinates(vec))


def subquotient(E, D, cells: list[str]) -> Subquotient:
    """ker(E) / im(D) on the free group with basis ``cells``."""
    n = len(cells)
    if n == 0:
        return Subquotient(cells, [], [])
    if E:
        s1 = smith_normal_form(E)
        r = s1.rank
        K = [[s1.V[i][j] for i in range(n)] for j in range(r, n)]          # kernel vectors
        Vinv_tail = [s1.V_inv[j][:] for j in range(r, n)]
        ker_check = E
    else:
        K = [[int(i == j) for i in range(n)] for j in range(n)]
        Vinv_tail = [[int(i == j) for i in range(n)] for j in range(n)]
        ker_check = []
    k = len(K)
    if k == 0:
        return Subquotient(cells, [], [], [], [], 0, ker_check)
    # express the columns of D in the kernel basis
    Dt = transpose(D) if D and D[0] else []
    Dk_cols = [matvec(Vinv_tail, col) for col in Dt]
    if Dk_cols:
        Dk = transpose(Dk_cols)                       # k x (#cols of D)
        s2 = smith_normal_form(Dk)
        diag = s2.diagonal
        U2, U2inv = s2.U, s2.U_inv
    else:
        diag = []
        U2 = [[int(i == j) for j in range(k)] for i in range(k)]
        U2inv = U2
    orders_all = diag + [0] * (k - len(diag))
    skip = sum(1 for d in diag if d == 1)
    # generators: K @ U2inv columns, dropping trivial ones (order 1 come first)
    gens = []
    for j in range(skip, k):
        col = [U2inv[i][j] for i in range(k)]
        gens.append([sum(K[t][c] * col[t] for t in range(k) if col[t]) for c in range(n)])
    return Subquotient(cells, gens, orders_all[skip:], Vinv_tail, U2, skip, ker_check)


# ---------------------------------------------------------------- groups

def _pair(X: StratifiedCellComplex, A=None, B=None):
    A = X.all_ids if A is None else X.require_subcomplex(frozenset(A), "A")
    B = frozenset() if B is None else X.require_subcomplex(frozenset(B), "B")
    if not B <= A:
        raise ComplexError(["relative pair needs B inside A"])
    return A, B


def _rel_cells(X, A, B, q):
    return [c for c in X.ids(q) if c in A and c not in B]


def chain_group(X, q, A=None, B=None) -> list[str]:
    A, B = _pair(X, A, B)
    return _rel_cells(X, A, B, q)


def homology(X: StratifiedCellComplex, q: int, coefficients: str = "integers",
             A=None, B=None) -> Subquotient:
    """H_q(A, B); rationals drop torsion (the free rank is the Betti number)."""
    A, B = _pair(X, A, B)
    cq = _rel_cells(X, A, B, q)
    E = X.boundary_matrix(q, _rel_cells(X, A, B, q - 1), cq) if q > 0 else []
    D = X.boundary_matrix(q + 1, cq, _rel_cells(X, A, B, q + 1))
    H = subquotient(E, D, cq)
    if coefficients == "rationals":
        keep = H.free_indices
        return _free_part(H, keep)
    if coefficients != "integers":
        raise ValueError("coefficients must be 'integers' or 'rationals'")
    return H


def relative_cohomology(X: StratifiedCellComplex, A, B, q: int) -> Subquotient:
    """H^q(A, B) with explicit cocycle representatives (functions on cells of A minus B)."""
    A, B = _pair(X, A, B)
    cq = _rel_cells(X, A, B, q)
    nxt = _rel_cells(X, A, B, q + 1)
    prv = _rel_cells(X, A, B, q - 1) if q > 0 else []
    # coboundary d^q = transpose of boundary_{q+1}
    E = transpose(X.boundary_matrix(q + 1, cq, nxt), len(nxt)) if nxt else []
    D = transpose(X.boundary_matrix(q, prv, cq), len(cq)) if prv and cq else []
    return subquotient(E, D, cq)


def cohomology(X: StratifiedCellComplex, q: int) -> Subquotient:
    return relative_cohomology(X, None, None, q)


def _free_part(H: Subquotient, keep) -> Subquotient:
    return Subquotient(H.cells, [H.generators[i] for i in keep], [0] * len(keep),
                       H._Vinv_tail, H._U2, H._skip, H._kernel, H.orders, list(keep))


def betti_numbers(X: StratifiedCellComplex, A=None, B=None) -> list[int]:
    return [homology(X, q, A=A, B=B).rank for q in range(X.dim + 1)]


# ---------------------------------------------------------------- maps

def _extend(vec, cells_from, cells_to):
    idx = {c: i for i, c in enumerate(cells_from)}
    return [vec[idx[c]] if c in idx else 0 for c in cells_to]


def _coboundary(X, cochain: dict, q: int, cells_next) -> list[int]:
    out = []
    for c in cells_next:
        out.append(sum(s * cochain.get(f, 0) for f, s in X.cells[c].boundary))
    return out


@dataclass
class InducedMap:
    """Integer matrix of a map between subquotients, columns = source generators."""
    matrix: list[list[int]]
    source: Subquotient
    target: Subquotient

    def rational_rank(self) -> int:
        rows = self.target.free_indices
        cols = self.source.free_indices
        M = [[self.matrix[i][j] for j in cols] for i in rows]
        if not M or not M[0]:
            return 0
        return smith_normal_form(M).rank


def restriction(X: StratifiedCellComplex, big: tuple, small: tuple, q: int) -> InducedMap:
    """H^q(A, B) -> H^q(A', B') for A' in A and B' in B (restriction of cocycles)."""
    A, B = _pair(X, *big)
    A2, B2 = _pair(X, *small)
    if not (A2 <= A and B2 <= B):
        raise ComplexError(["restriction needs A' inside A and B' inside B"])
    src = relative_cohomology(X, A, B, q)
    tgt = relative_cohomology(X, A2, B2, q)
    cols = []
    for g in src.generators:
        cols.append(tgt.coordinates(_extend(g, src.cells, tgt.cells)))
    return InducedMap(transpose(cols, len(tgt.orders)) if cols else [[] for _ in tgt.orders], src, tgt)


def inclusion_to_pair(X: StratifiedCellComplex, A, B, C, q: int) -> InducedMap:
    """H^q(A, B) -> H^q(A, C) for C inside B: extend cocycles by zero."""
    A, B = _pair(X, A, B)
    _, C = _pair(X, B, C)
    src = relative_cohomology(X, A, B, q)
    tgt = relative_cohomology(X, A, C, q)
    cols = [tgt.coordinates(_extend(g, src.cells, tgt.cells)) for g in src.generators]
    return InducedMap(transpose(cols, len(tgt.orders)) if cols else [[] for _ in tgt.orders], src, tgt)


def connecting_hom(X: StratifiedCellComplex, A, B, C, q: int) -> InducedMap:
    """delta: H^q(B, C) -> H^{q+1}(A, B) for subcomplexes A >= B >= C.

    Lift a cocycle on B minus C by zero to A minus C, take its coboundary
    there (it vanishes on B) and read it as a cocycle of (A, B).
    """
    A, B = _pair(X, A, B)
    _, C = _pair(X, B, C)
    src = relative_cohomology(X, B, C, q)
    tgt = relative_cohomology(X, A, B, q + 1)
    cols = []
    for g in src.generators:
        lifted = dict(zip(src.cells, g))
        cols.append(tgt.coordinates(_coboundary(X, lifted, q, tgt.cells)))
    return InducedMap(transpose(cols, len(tgt.orders)) if cols else [[] for _ in tgt.orders], src, tgt)


def les_check(X: StratifiedCellComplex, A, B, C) -> list[dict]:
    """Rational exactness of the long exact sequence of the triple (A, B, C).

    ... -> H^q(A,B) -j-> H^q(A,C) -i-> H^q(B,C) -d-> H^{q+1}(A,B) -> ...
    For each node returns dim, rank in, rank out; exact iff dim = in + out.
    """
    nodes = []
    for q in range(X.dim + 1):
        j = inclusion_to_pair(X, A, B, C, q)
        i = restriction(X, (A, C), (B, C), q)
        d = connecting_hom(X, A, B, C, q)
        nodes.append((f"H^{q}(A,B)", j.source.rank, j))
        nodes.append((f"H^{q}(A,C)", i.source.rank, i))
        nodes.append((f"H^{q}(B,C)", d.source.rank, d))
    out = []
    prev = None
    for name, dim, outgoing in nodes:
        rin = prev.rational_rank() if prev is not None else 0
        rout = outgoing.rational_rank()
        out.append({"node": name, "dim": dim, "rank_in": rin, "rank_out": rout,
                    "exact": dim == rin + rout})
        prev = outgoing
    return out


def rational_solve(M: list[list[int]], b: list) -> list[Fraction] | None:
    """One solution of M x = b over Q (None if inconsistent)."""
    rows = len(M)
    cols = len(M[0]) if rows else 0
    A = [[Fraction(v) for v in row] + [Fraction(bi)] for row, bi in zip(M, b)]
    piv_cols = []
    r = 0
    for c in range(cols):
        p = next((i for i in range(r, rows) if A[i][c] != 0), None)
        if p is None:
            continue
        A[r], A[p] = A[p], A[r]
        inv = 1 / A[r][c]
        A[r] = [v * inv for v in A[r]]
        for i in range(rows):
            if i != r and A[i][c] != 0:
                f = A[i][c]
                A[i] = [x - f * y for x, y in zip(A[i], A[r])]
        piv_cols.append(c)
        r += 1
        if r == rows:
            break
    if any(all(v == 0 for v in A[i][:cols]) and A[i][cols] != 0 for i in range(rows)):
        return None
    x = [Fraction(0)] * cols
    for i, c in enumerate(piv_cols):
        x[c] = A[i][cols]
    return x
