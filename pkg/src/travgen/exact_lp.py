"""Exact rational linear programming and polyhedral quotient norms.

A dense two-phase simplex over ``fractions.Fraction`` with Bland's rule
(no cycling, no rounding).  On top of it: the l1 quotient norm
min ||v + B u||_1 and the unit ball of that norm as the convex hull of the
images of the cross-polytope vertices.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import chain


class LPError(RuntimeError):
    pass


class Infeasible(LPError):
    pass


class Unbounded(LPError):
    pass


class DimensionCapExceeded(ValueError):
    pass


MAX_BALL_DIM = 6


@dataclass
class LPResult:
    value: Fraction
    x: list[Fraction]
    pivots: int = 0


def _pivot(T, obj_rows, r, c):
    piv = T[r][c]
    T[r] = [v / piv for v in T[r]]
    for rows in (T, obj_rows):
        for i, row in enumerate(rows):
            if (rows is T and i == r) or row[c] == 0:
                continue
            f = row[c]
            rows[i] = [a - f * b for a, b in zip(row, T[r])]


def _run(T, basis, obj, allowed, max_pivots):
    """Bland's-rule simplex on tableau T (rows end with rhs), minimising obj."""
    pivots = 0
    ncols = len(T[0]) - 1
    while True:
        enter = next((j for j in range(ncols) if allowed[j] and obj[0][j] < 0), None)
        if enter is None:
            return pivots
        best = None
        for i, row in enumerate(T):
            if row[enter] > 0:
                ratio = row[-1] / row[enter]
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            raise Unbounded("objective unbounded below")
        _pivot(T, obj, best[1], enter)
        basis[best[1]] = enter
        pivots += 1
        if pivots > max_pivots:
            raise LPError("pivot limit reached")


def solve_lp(c, A_eq, b_eq, max_pivots: int = 100_000) -> LPResult:
    """min c.x subject to A_eq x = b_eq, x >= 0, exactly."""
    c = [Fraction(v) for v in c]
    n = len(c)
    A = [[Fraction(v) for v in row] for row in A_eq]
    b = [Fraction(v) for v in b_eq]
    if any(len(row) != n for row in A) or len(A) != len(b):
        raise ValueError("shape mismatch in LP data")
    m = len(A)
    for i in range(m):
        if b[i] < 0:
            A[i] = [-v for v in A[i]]
            b[i] = -b[i]
    # phase 1: artificials n .. n+m-1
    T = [A[i] + [Fraction(int(k == i)) for k in range(m)] + [b[i]] for i in range(m)]
    basis = list(range(n, n + m))
    obj1 = [[Fraction(0)] * n + [Fraction(1)] * m + [Fraction(0)]]
    for row in T:
        obj1[0] = [a - v for a, v in zip(obj1[0], row)]
    allowed = [True] * (n + m)
    pivots = _run(T, basis, obj1, allowed, max_pivots)
    if -obj1[0][-1] != 0:
        raise Infeasible("constraints admit no non-negative solution")
    # drive remaining artificials out of the basis
    keep = []
    for i in range(m):
        if basis[i] >= n:
            col = next((j for j in range(n) if T[i][j] != 0), None)
            if col is None:
                continue            # redundant row
            _pivot(T, obj1, i, col)
            basis[i] = col
        keep.append(i)
    T = [T[i][:n] + [T[i][-1]] for i in keep]
    basis = [basis[i] for i in keep]
    # phase 2
    obj = [c + [Fraction(0)]]
    for i, bi in enumerate(basis):
        if obj[0][bi] != 0:
            f = obj[0][bi]
            obj[0] = [a - f * v for a, v in zip(obj[0], T[i])]
    pivots += _run(T, basis, obj, [True] * n, max_pivots)
    x = [Fraction(0)] * n
    for i, bi in enumerate(basis):
        x[bi] = T[i][-1]
    value = sum((ci * xi for ci, xi in zip(c, x)), Fraction(0))
    return LPResult(value, x, pivots)


# ---------------------------------------------------------------- quotient norms

def l1_quotient_norm(v, B) -> tuple[Fraction, list[Fraction]]:
    """min over real u of ||v + B u||_1, with the minimiser u.

    ``B`` is a list of columns (each of length len(v)).  Variables:
    u = u+ - u-, and the residual v + B u = p - q with p, q >= 0.
    """
    v = [Fraction(x) for x in v]
    m = len(v)
    cols = [[Fraction(x) for x in col] for col in B]
    k = len(cols)
    if k == 0:
        return sum((abs(x) for x in v), Fraction(0)), []
    if any(len(col) != m for col in cols):
        raise ValueError("columns of B must match the ambient dimension")
    # p - q - B u+ + B u- = v
    A = []
    for i in range(m):
        row = [Fraction(int(j == i)) for j in range(m)] + [Fraction(-int(j == i)) for j in range(m)]
        row += [-cols[t][i] for t in range(k)] + [cols[t][i] for t in range(k)]
        A.append(row)
    c = [Fraction(1)] * (2 * m) + [Fraction(0)] * (2 * k)
    res = solve_lp(c, A, v)
    u = [res.x[2 * m + t] - res.x[2 * m + k + t] for t in range(k)]
    return res.value, u


def annihilator(B, m: int) -> list[list[Fraction]]:
    """Rows spanning {y : y . b = 0 for every column b of B} (a projection with kernel span B)."""
    rows = [[Fraction(x) for x in col] for col in B]
    # reduced row echelon form of B^T, then read off the null space
    R = [r[:] for r in rows]
    pivots = []
    r = 0
    for c in range(m):
        p = next((i for i in range(r, len(R)) if R[i][c] != 0), None)
        if p is None:
            continue
        R[r], R[p] = R[p], R[r]
        inv = 1 / R[r][c]
        R[r] = [v * inv for v in R[r]]
        for i in range(len(R)):
            if i != r and R[i][c] != 0:
                f = R[i][c]
                R[i] = [a - f * b for a, b in zip(R[i], R[r])]
        pivots.append(c)
        r += 1
    free = [c for c in range(m) if c not in pivots]
    out = []
    for fcol in free:
        y = [Fraction(0)] * m
        y[fcol] = Fraction(1)
        for i, pc in enumerate(pivots):
            y[pc] = -R[i][fcol]
        out.append(y)
    return out


def in_convex_hull(p, points) -> bool:
    """Exact membership test: p = sum l_k q_k with l >= 0, sum l = 1."""
    if not points:
        return False
    d = len(p)
    A = [[Fraction(q[i]) for q in points] for i in range(d)] + [[Fraction(1)] * len(points)]
    b = [Fraction(x) for x in p] + [Fraction(1)]
    try:
        solve_lp([0] * len(points), A, b)
    except Infeasible:
        return False
    return True


def hull_vertices(points) -> list[tuple[Fraction, ...]]:
    """Extreme points of a finite set, exactly, in sorted order."""
    pts = sorted({tuple(Fraction(x) for x in p) for p in points})
    out = []
    for i, p in enumerate(pts):
        others = pts[:i] + pts[i + 1:]
        if not in_convex_hull(p, others):
            out.append(p)
    return out


@dataclass
class NormedQuotient:
    """R^m with the l1 norm in the given basis, modulo span of B's columns."""
    ambient_dim: int
    B: list[list[int]] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.B = [list(col) for col in self.B if any(col)]
        if any(len(col) != self.ambient_dim for col in self.B):
            raise ValueError("columns of B must match the ambient dimension")
        self._P = annihilator(self.B, self.ambient_dim)

    @property
    def quotient_dim(self) -> int:
        return len(self._P)

    def project(self, v) -> tuple[Fraction, ...]:
        return tuple(sum((Fraction(a) * b for a, b in zip(row, v)), Fraction(0)) for row in self._P)

    def quotient_norm(self, v) -> Fraction:
        if len(v) != self.ambient_dim:
            raise ValueError("vector length does not match the ambient dimension")
        return l1_quotient_norm(v, self.B)[0]

    def basis_images(self) -> list[tuple[Fraction, ...]]:
        out = []
        for i in range(self.ambient_dim):
            e = [int(i == k) for k in range(self.ambient_dim)]
            out.append(self.project(e))
        return out

    def ball_polytope(self) -> list[tuple[Fraction, ...]]:
        """Vertices of the quotient unit ball in projected coordinates."""
        if self.quotient_dim > MAX_BALL_DIM:
            raise DimensionCapExceeded(
                f"quotient dimension {self.quotient_dim} exceeds the cap of {MAX_BALL_DIM}")
        imgs = self.basis_images()
        pts = list(chain(imgs, (tuple(-x for x in p) for p in imgs)))
        return hull_vertices(p for p in pts if any(p)) if self.quotient_dim else []

    def to_json(self) -> dict:
        d = {"ambient_dim": self.ambient_dim, "B": self.B, "labels": self.labels,
             "projection": [[str(x) for x in row] for row in self._P]}
        try:
            d["ball_vertices"] = [[str(x) for x in p] for p in self.ball_polytope()]
        except DimensionCapExceeded as e:
            d["ball_vertices"] = None
            d["ball_notice"] = str(e)
        return d
