"""Small hand-built complexes: classical test spaces and stratified models.

Stratified models follow the filtration convention used by the Mho
complexes: an interior cell of a stratum with reduced norm k has depth k,
a boundary cell whose trajectory has reduced norm k has depth k + 1.
"""
from __future__ import annotations

from .complex import Cell, StratifiedCellComplex


def interval(name="interval") -> StratifiedCellComplex:
    return StratifiedCellComplex.from_simplices([(0, 1)], boundary_vertices=[0, 1], name=name)


def circle(n: int = 3, name="circle") -> StratifiedCellComplex:
    return StratifiedCellComplex.from_simplices([(i, (i + 1) % n) for i in range(n)], name=name)


def disk(name="disk") -> StratifiedCellComplex:
    return StratifiedCellComplex.from_simplices([(0, 1, 2)], boundary_vertices=[0, 1, 2], name=name)


def _ring_triangles(rings: int, n: int):
    """Triangulated annulus: ``rings`` concentric n-cycles, vertex (r, i) -> r*n + i."""
    tris = []
    for r in range(rings - 1):
        for i in range(n):
            a, b = r * n + i, r * n + (i + 1) % n
            c, d = (r + 1) * n + i, (r + 1) * n + (i + 1) % n
            tris += [(a, b, c), (b, d, c)]
    return tris


def annulus(n: int = 4, name="annulus") -> StratifiedCellComplex:
    """Three rings so the double along both boundary circles stays simplicial."""
    return StratifiedCellComplex.from_simplices(
        _ring_triangles(3, n), boundary_vertices=list(range(n)) + list(range(2 * n, 3 * n)), name=name)


def torus(n: int = 3, name="torus") -> StratifiedCellComplex:
    tris = []
    for i in range(n):
        for j in range(n):
            a = i * n + j
            b = ((i + 1) % n) * n + j
            c = i * n + (j + 1) % n
            d = ((i + 1) % n) * n + (j + 1) % n
            tris += [(a, b, d), (a, c, d)]
    return StratifiedCellComplex.from_simplices(tris, name=name)


def sphere(name="sphere") -> StratifiedCellComplex:
    return StratifiedCellComplex.from_simplices([(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)], name=name)


def projective_plane(name="projective_plane") -> StratifiedCellComplex:
    tris = [(1, 2, 3), (1, 3, 4), (1, 4, 5), (1, 5, 6), (1, 2, 6),
            (2, 3, 5), (2, 4, 5), (2, 4, 6), (3, 4, 6), (3, 5, 6)]
    return StratifiedCellComplex.from_simplices(tris, name=name)


# ---------------------------------------------------------------- stratified

def _tagged(X: StratifiedCellComplex, rule) -> StratifiedCellComplex:
    """Retag every cell with rule(cell) -> (stratum, depth)."""
    return X.with_tags(stratum=lambda c: rule(c)[0], depth=lambda c: rule(c)[1])


def interval_midpoint() -> StratifiedCellComplex:
    """Interval a - m - b: the midpoint is a depth-1 stratum, the ends are boundary."""
    X = StratifiedCellComplex.from_simplices([(0, 1), (1, 2)], boundary_vertices=[0, 2],
                                             name="interval_midpoint")

    def rule(c):
        if c.on_boundary:
            return "d11", 1
        if c.vertices == (1,):
            return "2", 1
        return "11", 0
    return _tagged(X, rule)


def annulus_tangent_circle(n: int = 4) -> StratifiedCellComplex:
    """Annulus whose middle circle is a depth-1 stratum (tangent chords)."""
    X = annulus(n, name="annulus_tangent_circle")
    mid = set(range(n, 2 * n))

    def rule(c):
        if c.on_boundary:
            return "d11", 1
        if set(c.vertices) <= mid:
            return "121", 1
        return "11", 0
    return _tagged(X, rule)


def fold_interval() -> StratifiedCellComplex:
    """Transversal slice of a fold: [-1, 1] with the fold point 0 at depth 1.

    Boundary ends carry depth 1 as boundary strata.
    """
    cells = [Cell("l", 0, [], "d11", 1, None, True), Cell("o", 0, [], "2", 1),
             Cell("r", 0, [], "d11", 1, None, True),
             Cell("lo", 1, [("o", 1), ("l", -1)], "11", 0), Cell("or", 1, [("r", 1), ("o", -1)], "11", 0)]
    return StratifiedCellComplex(cells, name="fold_interval")


def cell_circle() -> StratifiedCellComplex:
    cells = [Cell("p", 0, [], "11", 0), Cell("s", 1, [("p", 1), ("p", -1)], "11", 0)]
    return StratifiedCellComplex(cells, name="cell_circle")


def fold_times_circle() -> StratifiedCellComplex:
    """Fold slice times a circle: a cylinder whose core circle is the (2) stratum."""
    P = fold_interval().product(cell_circle(), name="fold_times_circle")
    return P.with_tags(stratum=lambda c: c.stratum.split("x")[0])


def torus_trivial() -> StratifiedCellComplex:
    return torus(name="torus_trivial").with_tags(stratum=lambda c: "11")


def torus_meridian(n: int = 3) -> StratifiedCellComplex:
    """Closed torus with one depth-1 circle (the vertices i*n, i = 0..n-1)."""
    X = torus(n, name="torus_meridian")
    circle_v = {i * n for i in range(n)}

    def rule(c):
        return ("121", 1) if set(c.vertices) <= circle_v else ("11", 0)
    return _tagged(X, rule)


def sphere_flag() -> StratifiedCellComplex:
    """S^2 with an equator at depth 1 carrying a depth-2 point."""
    X = sphere(name="sphere_flag")
    eq = {0, 1, 2}

    def rule(c):
        v = set(c.vertices)
        if c.vertices == (0,):
            return "1221", 2
        if v <= eq and len(v) < 3:
            return "121", 1
        return "11", 0
    return _tagged(X, rule)


STRATIFIED = {
    "interval_midpoint": interval_midpoint,
    "annulus_tangent_circle": annulus_tangent_circle,
    "fold_times_circle": fold_times_circle,
    "torus_trivial": torus_trivial,
    "torus_meridian": torus_meridian,
    "sphere_flag": sphere_flag,
}

CLASSICAL = {
    "interval": interval,
    "circle": circle,
    "disk": disk,
    "annulus": annulus,
    "torus": torus,
    "sphere": sphere,
    "projective_plane": projective_plane,
}


def load_model(name: str) -> StratifiedCellComplex:
    if name in STRATIFIED:
        return STRATIFIED[name]()
    if name in CLASSICAL:
        return CLASSICAL[name]()
    raise KeyError(f"unknown model {name!r}; known: {sorted(STRATIFIED) + sorted(CLASSICAL)}")
