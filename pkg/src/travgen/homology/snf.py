"""Smith normal form over the integers with tracked unimodular transforms.

Matrices are lists of row lists of Python ints, so entries never overflow.
``smith_normal_form(A)`` returns U, V (and their inverses) with U A V = D.
"""
from __future__ import annotations

from dataclasses import dataclass, field


def identity(n: int) -> list[list[int]]:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def matmul(A, B):
    if not A:
        return []
    nb = len(B[0]) if B else 0
    if not B:
        return [[0] * nb for _ in A]
    Bt = list(zip(*B))
    return [[sum(a * b for a, b in zip(row, col) if a) for col in Bt] for row in A]


def matvec(A, x):
    return [sum(a * b for a, b in zip(row, x) if a) for row in A]


def transpose(A, n_cols: int | None = None):
    if not A:
        return [[] for _ in range(n_cols or 0)]
    return [list(c) for c in zip(*A)]


def as_int_matrix(A) -> list[list[int]]:
    rows = [list(r) for r in A]
    out = []
    for r in rows:
        row = []
        for x in r:
            if int(x) != x:
                raise ValueError(f"non-integer entry {x!r}")
            row.append(int(x))
        out.append(row)
    if out and any(len(r) != len(out[0]) for r in out):
        raise ValueError("ragged matrix")
    return out


@dataclass
class SNFResult:
    D: list[list[int]]
    U: list[list[int]]
    V: list[list[int]]
    U_inv: list[list[int]]
    V_inv: list[list[int]]
    shape: tuple[int, int] = (0, 0)
    diagonal: list[int] = field(default_factory=list)

    @property
    def rank(self) -> int:
        return len(self.diagonal)

    @property
    def torsion(self) -> list[int]:
        return [d for d in self.diagonal if d > 1]

    def verify(self, A) -> bool:
        m, n = self.shape
        if matmul(matmul(self.U, A), self.V) != self.D:
            return False
        if matmul(self.U, self.U_inv) != identity(m) or matmul(self.V, self.V_inv) != identity(n):
            return False
        d = self.diagonal
        return all(d[i + 1] % d[i] == 0 for i in range(len(d) - 1)) and all(x > 0 for x in d)


def _row_add(M, dst, src, k):
    if k:
        rs, rd = M[src], M[dst]
        M[dst] = [a + k * b for a, b in zip(rd, rs)]


def _col_add(M, dst, src, k):
    if k:
        for row in M:
            if row[src]:
                row[dst] += k * row[src]


def smith_normal_form(A) -> SNFResult:
    A = as_int_matrix(A)
    m = len(A)
    n = len(A[0]) if m else 0
    D = [r[:] for r in A]
    U, Ui, V, Vi = identity(m), identity(m), identity(n), identity(n)

    # elementary operations, each mirrored on the transforms and their inverses
    def rswap(i, j):
        if i != j:
            D[i], D[j] = D[j], D[i]
            U[i], U[j] = U[j], U[i]
            for row in Ui:
                row[i], row[j] = row[j], row[i]

    def cswap(i, j):
        if i != j:
            for row in D:
                row[i], row[j] = row[j], row[i]
            for row in V:
                row[i], row[j] = row[j], row[i]
            Vi[i], Vi[j] = Vi[j], Vi[i]

    def radd(dst, src, k):          # row_dst += k row_src
        _row_add(D, dst, src, k)
        _row_add(U, dst, src, k)
        _col_add(Ui, src, dst, -k)

    def cadd(dst, src, k):          # col_dst += k col_src
        _col_add(D, dst, src, k)
        _col_add(V, dst, src, k)
        _row_add(Vi, src, dst, -k)

    def rneg(i):
        D[i] = [-x for x in D[i]]
        U[i] = [-x for x in U[i]]
        for row in Ui:
            row[i] = -row[i]

    diag = []
    t = 0
    while t < min(m, n):
        # smallest nonzero entry of the trailing block as pivot
        best = None
        for i in range(t, m):
            row = D[i]
            for j in range(t, n):
                v = row[j]
                if v and (best is None or abs(v) < best[0]):
                    best = (abs(v), i, j)
                    if best[0] == 1:
                        break
            if best is not None and best[0] == 1:
                break
        if best is None:
            break
        _, i, j = best
        rswap(t, i)
        cswap(t, j)
        while True:
            p = D[t][t]
            moved = False
            for i in range(t + 1, m):
                if D[i][t]:
                    radd(i, t, -(D[i][t] // p))
                    if D[i][t]:
                        rswap(t, i)
                        moved = True
                        break
            if moved:
                continue
            for j in range(t + 1, n):
                if D[t][j]:
                    cadd(j, t, -(D[t][j] // p))
                    if D[t][j]:
                        cswap(t, j)
                        moved = True
                        break
            if moved:
                continue
            # row and column clear; enforce divisibility of the rest
            bad = next(((i, j) for i in range(t + 1, m) for j in range(t + 1, n)
                        if D[i][j] % p), None)
            if bad is None:
                break
            radd(t, bad[0], 1)
        if D[t][t] < 0:
            rneg(t)
        diag.append(D[t][t])
        t += 1
    return SNFResult(D, U, V, Ui, Vi, (m, n), diag)


def kernel_basis(A, n_cols: int | None = None) -> list[list[int]]:
    """Integer basis (as columns listed as vectors) of {x : A x = 0}."""
    A = as_int_matrix(A)
    n = len(A[0]) if A else (n_cols or 0)
    if not A:
        return [[int(i == j) for i in range(n)] for j in range(n)]
    s = smith_normal_form(A)
    return [[s.V[i][j] for i in range(n)] for j in range(s.rank, n)]


def determinant(A) -> int:
    """Exact determinant via fraction-free (Bareiss) elimination."""
    M = as_int_matrix(A)
    n = len(M)
    if any(len(r) != n for r in M):
        raise ValueError("determinant of a non-square matrix")
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if M[k][k] == 0:
            sw = next((i for i in range(k + 1, n) if M[i][k]), None)
            if sw is None:
                return 0
            M[k], M[sw] = M[sw], M[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[n - 1][n - 1]
