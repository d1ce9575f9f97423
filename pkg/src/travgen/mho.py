"""Differential complexes built from a depth filtration, and localized duality.

For a stratified cell model X of dimension N with closed pieces
G_j = {depth >= j} (the double variant) or G_j = {depth >= j} u dX (the
interior variant), the group in degree N - j is H^{N-j}(G_j, G_{j+1}),
based by the connected components of the depth-j open strata, and the
differential is the connecting map of (G_{j-1}, G_j, G_{j+1}).  Localized
duality sends H_j(X) through Poincare (or Lefschetz) duality and
restriction to G_j, and expresses the result in the quotient of the
degree N - j group by the image of the incoming differential.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .exact_lp import NormedQuotient, l1_quotient_norm
from .homology.cohomology import rational_solve, relative_cohomology, restriction, transpose
from .homology.complex import StratifiedCellComplex
from .homology.duality import duality_map, manifold_boundary
from .homology.snf import determinant, matmul, smith_normal_form

VARIANTS = ("double", "interior")


class StratificationDefect(RuntimeError):
    """The filtration does not produce free groups of the expected rank."""


@dataclass
class MhoGroup:
    codim: int
    degree: int
    basis: list[str]                     # component identifiers
    cycles: list[dict]                   # relative fundamental chain per component
    cocycles: list[dict]                 # dual cocycle per component
    rule_count: int

    @property
    def rank(self) -> int:
        return len(self.basis)


@dataclass
class MhoComplex:
    variant: str
    dim: int
    groups: dict[int, MhoGroup]          # keyed by codimension
    differentials: dict[int, list[list[int]]]   # degree d: C^d -> C^{d+1}
    total: StratifiedCellComplex = field(repr=False)
    pieces: list[frozenset] = field(repr=False, default_factory=list)
    base: frozenset = field(repr=False, default_factory=frozenset)
    involution: dict | None = field(repr=False, default=None)
    heuristic: bool = False

    def group(self, degree: int) -> MhoGroup:
        return self.groups[self.dim - degree]

    def delta(self, degree: int) -> list[list[int]]:
        return self.differentials[degree]

    def boundaries(self, codim: int) -> list[list[int]]:
        """Columns spanning the image of the differential into the codim group."""
        d = self.dim - codim - 1
        M = self.differentials.get(d)
        if not M:
            return []
        return [list(col) for col in zip(*M)] if M and M[0] else []

    def quotient(self, codim: int) -> NormedQuotient:
        g = self.groups[codim]
        return NormedQuotient(g.rank, self.boundaries(codim), list(g.basis))

    def check_dd(self) -> bool:
        for d in sorted(self.differentials):
            if d + 1 in self.differentials:
                A, B = self.differentials[d + 1], self.differentials[d]
                if A and B and A[0] and B[0]:
                    if any(any(row) for row in matmul(A, B)):
                        return False
        return True

    def to_json(self) -> dict:
        return {
            "variant": self.variant, "dim": self.dim, "heuristic": self.heuristic,
            "groups": [{"codim": g.codim, "degree": g.degree, "rank": g.rank,
                        "basis": g.basis, "rule_count": g.rule_count}
                       for g in sorted(self.groups.values(), key=lambda g: g.degree)],
            "differentials": [{"from_degree": d, "matrix": M}
                              for d, M in sorted(self.differentials.items())],
        }


def basis_rule_count(model: StratifiedCellComplex, depth: int, variant: str, doubled: bool) -> int:
    """Component count the basis must have, read off the undoubled model.

    Double: interior components of that depth twice plus boundary components
    of that depth once (a boundary stratum with reduced norm k sits at depth
    k + 1).  Interior: interior components of that depth.
    """
    bnd = model.boundary_cells
    interior = [c for c in model.cells if c not in bnd]
    n_int = len(model.stratum_components(depth, interior))
    if variant == "interior":
        return n_int
    if not doubled:
        return len(model.stratum_components(depth))
    return 2 * n_int + len(model.stratum_components(depth, bnd))


def _component_label(tag, cells, k) -> str:
    return f"{tag}#{k}"


def _relative_cycle(X, comp_cells, rel_cells_lower, q) -> dict:
    top = [c for c in comp_cells if X.cells[c].dim == q]
    if not top:
        return {}
    M = X.boundary_matrix(q, rel_cells_lower, top)
    if M and any(any(r) for r in M):
        s = smith_normal_form(M)
        ker = [[s.V[i][j] for i in range(len(top))] for j in range(s.rank, len(top))]
    else:
        ker = [[int(i == j) for i in range(len(top))] for j in range(len(top))]
    if len(ker) != 1:
        return {"__rank__": len(ker)}
    v = ker[0]
    sgn = 1 if next(x for x in v if x) > 0 else -1
    return {c: sgn * x for c, x in zip(top, v) if x}


def build_mho(model: StratifiedCellComplex, variant: str = "double", heuristic: bool = False) -> MhoComplex:
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    bnd = model.boundary_cells
    inv = None
    if variant == "double" and bnd:
        total, inv = model.double(bnd)
        base = frozenset()
        doubled = True
    else:
        total = model
        base = bnd if variant == "interior" else frozenset()
        doubled = False
    N = total.dim
    if any(c.depth > N for c in total.cells.values()):
        raise StratificationDefect(f"depth exceeds the dimension {N}")
    pieces = [total.depth_at_least(j) | base for j in range(N + 2)]

    groups: dict[int, MhoGroup] = {}
    for j in range(N + 1):
        q = N - j
        A, B = pieces[j], pieces[j + 1]
        H = relative_cohomology(total, A, B, q)
        if H.torsion:
            raise StratificationDefect(f"codim {j}: torsion {H.torsion} in H^{q}")
        pool = [c for c in A if c not in B]
        comps = total.stratum_components(j, pool)
        rule = basis_rule_count(model, j, variant, doubled)
        if H.rank != len(comps) or H.rank != rule:
            raise StratificationDefect(
                f"codim {j}: rank {H.rank}, {len(comps)} components, basis rule {rule}")
        lower = [c for c in total.ids(q - 1) if c in A and c not in B] if q > 0 else []
        cycles, labels = [], []
        for k, (tag, cells) in enumerate(comps):
            z = _relative_cycle(total, cells, lower, q)
            if not z or "__rank__" in z:
                raise StratificationDefect(f"codim {j}: component {tag}#{k} carries no relative fundamental cycle")
            cycles.append(z)
            labels.append(_component_label(tag, cells, k))
        # dual basis: pairing of generators with component cycles must be unimodular
        gens = [H.generators[i] for i in H.free_indices]
        P = [[sum(g[H.cells.index(c)] * v for c, v in z.items()) for g in gens] for z in cycles]
        if P and abs(determinant(P)) != 1:
            raise StratificationDefect(f"codim {j}: component cycles do not form a dual basis")
        cocycles = []
        if P:
            s = smith_normal_form(P)
            Pinv = matmul(s.V, s.U)
            for S in range(len(cycles)):
                coeffs = [Pinv[i][S] for i in range(len(gens))]
                vec = [sum(coeffs[i] * gens[i][t] for i in range(len(gens))) for t in range(len(H.cells))]
                cocycles.append({c: v for c, v in zip(H.cells, vec) if v})
        groups[j] = MhoGroup(j, q, labels, cycles, cocycles, rule)

    differentials: dict[int, list[list[int]]] = {}
    for j in range(N):
        # connecting map of (G_j, G_{j+1}, G_{j+2}) from codim j+1 to codim j
        src, tgt = groups[j + 1], groups[j]
        cols = []
        for e in src.cocycles:
            col = []
            for z in tgt.cycles:
                val = 0
                for c, coef in z.items():
                    val += coef * sum(s * e.get(f, 0) for f, s in total.cells[c].boundary)
                col.append(val)
            cols.append(col)
        M = transpose(cols, tgt.rank) if cols else [[] for _ in range(tgt.rank)]
        differentials[src.degree] = M
    out = MhoComplex(variant, N, groups, differentials, total, pieces, base, inv, heuristic)
    if not out.check_dd():
        raise StratificationDefect("differential squares to a nonzero map")
    return out


# ---------------------------------------------------------------- localized duality

@dataclass
class LocalizedPD:
    j: int
    variant: str
    matrix: list[list[int]]              # H_j generators -> H^{N-j}(G_j, base) free coordinates
    lift: list[list[Fraction]]           # H_j generators -> coordinates in the C group (a lift)
    restriction_from_group: list[list[int]]   # C^{N-j} -> H^{N-j}(G_j, base)
    iso_verified: bool
    n_homology: int
    quotient: NormedQuotient = field(repr=False, default=None)

    @property
    def rank(self) -> int:
        M = [r for r in self.matrix if any(r)]
        return smith_normal_form(M).rank if M and M[0] else 0

    def kernel_basis(self) -> list[list[Fraction]]:
        from .exact_lp import annihilator
        if not self.matrix or not self.matrix[0]:
            return [[Fraction(int(i == k)) for i in range(self.n_homology)] for k in range(self.n_homology)]
        # kernel of M = annihilator of the row space, i.e. of columns of M^T
        return annihilator([list(r) for r in self.matrix], self.n_homology)

    def image_norm(self, h) -> Fraction:
        """Quotient norm of L(h) for a homology coordinate vector h."""
        v = [sum(Fraction(self.lift[i][k]) * h[k] for k in range(self.n_homology))
             for i in range(len(self.lift))]
        return l1_quotient_norm(v, self.quotient.B)[0]

    def to_json(self) -> dict:
        return {"j": self.j, "variant": self.variant, "matrix": self.matrix,
                "lift": [[str(x) for x in row] for row in self.lift],
                "restriction_from_group": self.restriction_from_group,
                "iso_verified": self.iso_verified, "rank": self.rank}


def localized_pd(mho: MhoComplex, j: int) -> LocalizedPD:
    X = mho.total
    N = mho.dim
    p = N - j
    relative = mho.variant == "interior" and bool(mho.base)
    if relative and manifold_boundary(X) != mho.base:
        raise StratificationDefect("boundary cells do not match the manifold boundary")
    D = duality_map(X, p, relative)
    Dinv = D.inverse()                                   # H_j -> H^p(X, base), free coords
    Gj = mho.pieces[j]
    res = restriction(X, (X.all_ids, mho.base), (Gj, mho.base), p)
    rows = res.target.free_indices
    src_free = res.source.free_indices
    R = [[res.matrix[r][c] for c in src_free] for r in rows]
    L = matmul(R, Dinv) if R and R[0] and Dinv else [[0] * len(Dinv) for _ in rows]
    # the group maps into H^p(G_j, base) by extending component cocycles by zero
    g = mho.groups[j]
    tgt = res.target
    pi_cols = []
    for e in g.cocycles:
        vec = [e.get(c, 0) for c in tgt.cells]
        co = tgt.coordinates(vec)
        pi_cols.append([co[r] for r in rows])
    Pi = transpose(pi_cols, len(rows)) if pi_cols else [[] for _ in rows]
    # exactness checks: pi kills the image of the incoming differential and is onto
    Bcols = mho.boundaries(j)
    kills = all(not any(sum(Pi[r][k] * b[k] for k in range(len(b))) for r in range(len(rows)))
                for b in Bcols) if Pi and Pi[0] else True
    rank_pi = smith_normal_form(Pi).rank if Pi and Pi[0] else 0
    rank_B = smith_normal_form(transpose(Bcols)).rank if Bcols else 0
    iso = kills and rank_pi == len(rows) and rank_pi == g.rank - rank_B
    lift = []
    n_h = len(Dinv[0]) if Dinv else 0
    cols = [[L[r][k] for r in range(len(rows))] for k in range(n_h)]
    lift_cols = []
    for col in cols:
        if not rows:
            lift_cols.append([Fraction(0)] * g.rank)
            continue
        x = rational_solve(Pi, col) if Pi and Pi[0] else None
        if x is None:
            x = [Fraction(0)] * g.rank
            iso = False
        lift_cols.append(x)
    lift = transpose(lift_cols, g.rank) if lift_cols else [[] for _ in range(g.rank)]
    return LocalizedPD(j, mho.variant, L, lift, Pi, iso, n_h, mho.quotient(j))


# ---------------------------------------------------------------- checks against annotations

@dataclass
class RedFlag:
    j: int
    kernel_vector: list[Fraction]
    message: str


def kernel_red_flags(lpd: LocalizedPD, annotation) -> list[RedFlag]:
    """Kernel directions of L_j that the annotation says have nonzero seminorm.

    The annotation's zero subspace must be written in the same homology
    basis as ``lpd``.  An empty list means ker(L_j) sits inside the zero
    subspace, as expected.  Any record is an empirical red flag.
    """
    if annotation.rank is not None and annotation.rank != lpd.n_homology:
        raise ValueError(f"annotation has rank {annotation.rank}, H_{lpd.j} has rank {lpd.n_homology}")
    flags = []
    for v in lpd.kernel_basis():
        if not annotation.contains_zero(v):
            flags.append(RedFlag(lpd.j, v, "class in the kernel of the localized operator "
                                           "is annotated with nonzero seminorm"))
    return flags


@dataclass
class RankChain:
    j: int
    reduced: int | None
    image: int
    quotient: int
    group: int
    kernel_in_zero: bool | None

    @property
    def holds(self) -> bool:
        ok = self.image <= self.quotient <= self.group
        if self.reduced is not None and self.kernel_in_zero:
            ok = ok and self.reduced <= self.image
        return ok

    def to_dict(self) -> dict:
        return {"j": self.j, "reduced_rank": self.reduced, "image_rank": self.image,
                "quotient_rank": self.quotient, "group_rank": self.group,
                "kernel_in_zero_subspace": self.kernel_in_zero, "holds": self.holds}


def rank_chain(mho: MhoComplex, j: int, annotation=None, lpd: LocalizedPD | None = None) -> RankChain:
    """rank H^Delta_j <= rank im L_j <= rank C/B <= rank C, each term computed."""
    lpd = lpd or localized_pd(mho, j)
    g = mho.groups[j]
    Bc = mho.boundaries(j)
    rank_B = smith_normal_form(transpose(Bc)).rank if Bc else 0
    reduced = kin = None
    if annotation is not None:
        from .norms import reduced_rank
        reduced = reduced_rank(annotation, j).value
        if annotation.zero_basis is not None:
            kin = not kernel_red_flags(lpd, annotation)
    return RankChain(j, reduced, lpd.rank, g.rank - rank_B, g.rank, kin)


# ---------------------------------------------------------------- grid models from atlases

def atlas_complex(atlas, name: str = "atlas") -> StratifiedCellComplex:
    """Triangulated chart grid tagged by sampled patterns (heuristic topology).

    Each boundary curve contributes a periodic strip (arc position x entry
    angle); squares are split into two triangles.  A cell takes the pattern
    of its lowest-codimension vertex and that codimension as depth, so faces
    never have smaller depth than the cells they bound.  Rows at tangent
    entry angles form the boundary.  Only geodesic atlases carry this grid.
    """
    from .omega import as_pattern
    if atlas.kind != "geodesic" or len(atlas.resolution) != 2:
        raise ValueError("grid models need a geodesic atlas")
    n_angles = atlas.resolution[1]
    curves = atlas.chart[:, 0].astype(int)
    pats = atlas.patterns
    if any(p is None for p in pats):
        raise StratificationDefect("atlas has unclassified nodes; the grid would have holes")
    depth = [as_pattern(p).reduced_norm for p in pats]
    tris = []
    base = 0
    for ci in sorted(set(curves.tolist())):
        k = int((curves == ci).sum()) // n_angles
        for i in range(k):
            i2 = (i + 1) % k
            for a in range(n_angles - 1):
                p00 = base + i * n_angles + a
                p01 = p00 + 1
                p10 = base + i2 * n_angles + a
                p11 = p10 + 1
                tris += [(p00, p10, p11), (p00, p01, p11)]
        base += k * n_angles
    bverts = [i for i, t in enumerate(atlas.tangent_entry) if t]

    def lowest(vs):
        return min(vs, key=lambda v: (depth[v], v))

    X = StratifiedCellComplex.from_simplices(
        tris, stratum=lambda s: pats[lowest(s)], depth=lambda s: depth[lowest(s)],
        boundary_vertices=bverts, name=name)
    return X
