"""Pattern atlas over the entry chart, stratum components, and the counting bounds.

The chart of a geodesic field is (boundary point, angle from the inward
normal in [-pi/2, pi/2]); the two extreme angles are the tangent entries.
For an explicit planar field the chart is the inward part of the boundary,
with the tangent points inserted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .flow.domain import FlowSystem
from .flow.integrate import Tolerances, TrajectoryRecord, trace
from .flow.scatter import boundary_curves, inward_normal, resample_curve
from .omega import as_pattern, parse_pattern


class AtlasHoles(RuntimeError):
    """Too many chart nodes failed to classify."""


class MissingAnnotation(ValueError):
    pass


@dataclass
class CountRow:
    pattern: str
    codim: int
    components: int
    nodes: int


@dataclass
class StrataAtlas:
    kind: str                           # "geodesic" | "explicit"
    states: np.ndarray                  # entry state per node
    chart: np.ndarray                   # (curve index, arc fraction, angle) per node
    patterns: list                      # pattern string or None (failed)
    tangent_entry: np.ndarray           # entry point has multiplicity >= 2
    edges: np.ndarray                   # (m, 2) chart adjacency
    component: np.ndarray               # component id per node, -1 for failed
    records: list[TrajectoryRecord] = field(repr=False, default_factory=list)
    trajectory_dim: int = 2
    resolution: tuple = ()

    @property
    def n_nodes(self) -> int:
        return len(self.patterns)

    @property
    def failed_fraction(self) -> float:
        return sum(p is None for p in self.patterns) / max(1, self.n_nodes)

    def component_patterns(self) -> dict[int, str]:
        out = {}
        for c, p in zip(self.component, self.patterns):
            if c >= 0:
                out[int(c)] = p
        return out

    def counts(self) -> list[CountRow]:
        comps: dict[str, set] = {}
        nodes: dict[str, int] = {}
        for c, p in zip(self.component, self.patterns):
            if p is None:
                continue
            comps.setdefault(p, set()).add(int(c))
            nodes[p] = nodes.get(p, 0) + 1
        rows = [CountRow(p, as_pattern(p).reduced_norm, len(comps[p]), nodes[p]) for p in comps]
        rows.sort(key=lambda r: as_pattern(r.pattern).sort_key())
        return rows

    def count_map(self) -> dict[str, int]:
        return {r.pattern: r.components for r in self.counts()}


# ---------------------------------------------------------------- chart meshes

def _geodesic_chart(system: FlowSystem, n_points: int, n_angles: int, resolution: int):
    dom = system.domain
    curves = boundary_curves(dom, resolution)
    lengths = np.array([np.sum(np.linalg.norm(np.diff(np.vstack([c, c[:1]]), axis=0), axis=1))
                        for c in curves])
    counts = np.maximum(8, np.round(n_points * lengths / lengths.sum()).astype(int))
    phis = np.linspace(-np.pi / 2, np.pi / 2, n_angles)
    states, chart, edges = [], [], []
    base = 0
    for ci, (c, k) in enumerate(zip(curves, counts)):
        pts = resample_curve(dom, c, k)
        nrm = inward_normal(dom, pts)
        ang = np.arctan2(nrm[:, 1], nrm[:, 0])
        for i in range(k):
            for a, phi in enumerate(phis):
                states.append((pts[i, 0], pts[i, 1], ang[i] + phi))
                chart.append((ci, i / k, phi))
        idx = base + np.arange(k)[:, None] * n_angles + np.arange(n_angles)[None, :]
        edges.append(np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1))
        edges.append(np.stack([idx.ravel(), np.roll(idx, -1, axis=0).ravel()], axis=1))
        base += k * n_angles
    tangent = np.array([abs(abs(c[2]) - np.pi / 2) < 1e-12 for c in chart])
    return np.array(states), np.array(chart, dtype=float), np.concatenate(edges), tangent


def _explicit_chart(system: FlowSystem, n_points: int, resolution: int):
    dom = system.domain
    curves = boundary_curves(dom, resolution)
    lengths = np.array([np.sum(np.linalg.norm(np.diff(np.vstack([c, c[:1]]), axis=0), axis=1))
                        for c in curves])
    counts = np.maximum(16, np.round(n_points * lengths / lengths.sum()).astype(int))
    states, chart, edges, tangent = [], [], [], []
    for ci, (c, k) in enumerate(zip(curves, counts)):
        pts = resample_curve(dom, c, k)
        lz = system.lz(pts)
        ring = []      # (arc fraction, point, is tangent) around the curve
        for i in range(k):
            ring.append((i / k, pts[i], False, lz[i]))
            j = (i + 1) % k
            if lz[i] * lz[j] < 0:
                a, b, va = pts[i], pts[j], lz[i]
                for _ in range(60):
                    mid = dom.project_to_boundary(0.5 * (a + b))[0]
                    vm = system.lz(mid[None, :])[0]
                    if np.sign(vm) == np.sign(va):
                        a, va = mid, vm
                    else:
                        b = mid
                p = dom.project_to_boundary(0.5 * (a + b))[0]
                ring.append(((i + 0.5) / k, p, True, 0.0))
        keep = [r for r in ring if r[2] or r[3] <= 0]
        start = len(states)
        for frac, p, tan, _ in keep:
            states.append(tuple(p))
            chart.append((ci, frac, 0.0))
            tangent.append(tan)
        # ring neighbours survive only if both ends are inward or tangent
        pos = {id(r): n for n, r in enumerate(keep)}
        for r0, r1 in zip(ring, ring[1:] + ring[:1]):
            if id(r0) in pos and id(r1) in pos:
                edges.append((start + pos[id(r0)], start + pos[id(r1)]))
    return (np.array(states), np.array(chart, dtype=float),
            np.array(edges, dtype=int).reshape(-1, 2), np.array(tangent))


# ---------------------------------------------------------------- atlas

def _event_points(rec: TrajectoryRecord, sd: int) -> np.ndarray:
    return np.array([e.state[:sd] for e in rec.events])


def _start_key(system: FlowSystem, state) -> np.ndarray:
    s = np.asarray(state, dtype=float)
    if system.field.kind == "geodesic":
        return np.array([s[0], s[1], math.cos(s[2]), math.sin(s[2])])
    return s


def build_atlas(system: FlowSystem, n_points: int = 200, n_angles: int = 51,
                tol: Tolerances | None = None, resolution: int = 512,
                continuity: float = 0.1, max_failed: float = 0.01) -> StrataAtlas:
    """Classify every chart node and split same-pattern nodes into components.

    Adjacent nodes join when their patterns agree and every boundary event
    of one trajectory lies within ``continuity * diameter`` of the matching
    event of the other.  Nodes whose entry is not the start of their
    trajectory join the node whose trajectory starts at the same state.
    """
    tol = tol or Tolerances()
    if system.field.kind == "geodesic":
        states, chart, edges, tangent = _geodesic_chart(system, n_points, n_angles, resolution)
        res = (n_points, n_angles)
    else:
        if system.dim != 2:
            raise ValueError("explicit atlases are built for planar fields only")
        states, chart, edges, tangent = _explicit_chart(system, n_points, resolution)
        res = (n_points,)
    recs = trace(system, states, tol)
    pats = [str(r.pattern) if r.status == "ok" else None for r in recs]
    n = len(pats)
    failed = sum(p is None for p in pats) / max(n, 1)
    if failed > max_failed:
        raise AtlasHoles(f"{failed:.2%} of chart nodes failed to classify")
    sd = system.field.spatial_dim
    eps = continuity * system.length_scale

    keep = []
    for a, b in edges:
        pa, pb = pats[a], pats[b]
        if pa is None or pa != pb:
            continue
        ea, eb = _event_points(recs[a], sd), _event_points(recs[b], sd)
        if np.max(np.linalg.norm(ea - eb, axis=1)) <= eps:
            keep.append((a, b))

    # trajectories seen from a non-start node are matched to a start node
    by_pattern: dict[str, list[int]] = {}
    for i, r in enumerate(recs):
        if pats[i] is not None and r.entry_is_start:
            by_pattern.setdefault(pats[i], []).append(i)
    trees = {p: cKDTree(np.array([_start_key(system, recs[i].start_state) for i in idx]))
             for p, idx in by_pattern.items()}
    for i, r in enumerate(recs):
        if pats[i] is None or r.entry_is_start or pats[i] not in trees:
            continue
        d, j = trees[pats[i]].query(_start_key(system, r.start_state))
        if d <= eps:
            keep.append((i, by_pattern[pats[i]][j]))

    ok = np.array([p is not None for p in pats])
    if keep:
        kk = np.array(keep)
        graph = coo_matrix((np.ones(len(kk)), (kk[:, 0], kk[:, 1])), shape=(n, n))
    else:
        graph = coo_matrix((n, n))
    _, labels = connected_components(graph, directed=False)
    # relabel in node order so ids are reproducible
    comp = np.full(n, -1)
    remap: dict[int, int] = {}
    for i in range(n):
        if ok[i]:
            comp[i] = remap.setdefault(int(labels[i]), len(remap))
    return StrataAtlas(system.field.kind, states, chart, pats, tangent, edges, comp, recs,
                       trajectory_dim=system.dim - 1, resolution=res)


def refinement_stability(system: FlowSystem, n_points: int, n_angles: int = 51,
                         tol: Tolerances | None = None, **kw):
    """Counts at a resolution and at double resolution; stable iff equal."""
    a = build_atlas(system, n_points, n_angles, tol, **kw)
    b = build_atlas(system, 2 * n_points, 2 * n_angles - 1, tol, **kw)
    return a.count_map() == b.count_map(), a, b


# ---------------------------------------------------------------- convexity

@dataclass
class ConvexityResult:
    k: int
    convex: bool
    witnesses: list[tuple]


def check_k_convexity(atlas: StrataAtlas, k: int, max_witnesses: int = 10) -> ConvexityResult:
    """True iff no sampled trajectory has reduced norm >= k."""
    wit = []
    for s, p in zip(atlas.states, atlas.patterns):
        if p is not None and as_pattern(p).reduced_norm >= k:
            wit.append((p, tuple(float(v) for v in s)))
    return ConvexityResult(k, not wit, wit[:max_witnesses])


# ---------------------------------------------------------------- bounds

@dataclass(frozen=True)
class RankValue:
    """A lower bound (or exact value) for a reduced homology rank, with provenance."""
    value: int
    provenance: str
    exact: bool = True

    def __post_init__(self):
        if not isinstance(self.value, int) or self.value < 0:
            raise ValueError("rank must be a non-negative integer")
        if not self.provenance or not self.provenance.strip():
            raise MissingAnnotation("rank value without provenance")


@dataclass
class BoundRecord:
    j: int
    lhs1: int
    lhs2: int
    rhs_m: RankValue | None
    rhs_dm: RankValue | None
    terms1: list = field(default_factory=list)
    terms2: list = field(default_factory=list)

    @property
    def satisfied_m(self):
        return None if self.rhs_m is None else self.lhs1 >= self.rhs_m.value

    @property
    def satisfied_dm(self):
        return None if self.rhs_dm is None else self.lhs2 >= self.rhs_dm.value

    @property
    def satisfied(self) -> bool:
        return all(s is not False for s in (self.satisfied_m, self.satisfied_dm))

    def to_dict(self) -> dict:
        def rv(r):
            return None if r is None else {"value": r.value, "provenance": r.provenance,
                                           "exact": r.exact}
        return {"j": self.j, "lhs1": self.lhs1, "lhs2": self.lhs2,
                "rhs_m": rv(self.rhs_m), "rhs_dm": rv(self.rhs_dm),
                "satisfied_m": self.satisfied_m, "satisfied_dm": self.satisfied_dm,
                "satisfied": self.satisfied, "terms1": self.terms1, "terms2": self.terms2}


def _counts_of(source) -> dict[str, int]:
    if isinstance(source, StrataAtlas):
        return source.count_map()
    out = {}
    for key, n in dict(source).items():
        p = key if not isinstance(key, str) else parse_pattern(key)
        p = as_pattern(p)
        if not isinstance(n, int) or n < 0:
            raise ValueError(f"component count for {p} must be a non-negative int")
        out[str(p)] = out.get(str(p), 0) + n
    return out


def morse_bound_report(source, j: int, rhs_m: RankValue | None = None,
                       rhs_dm: RankValue | None = None) -> BoundRecord:
    """Weighted component sums against annotated reduced ranks.

    LHS1 sums sup(w) * #components over patterns with |w|' = j; LHS2 adds
    2 * (sup(w^) - 1) * #components over patterns with |w^|' = j + 1.
    Integer arithmetic only.
    """
    if rhs_m is None and rhs_dm is None:
        raise MissingAnnotation(f"no rank annotation supplied for degree {j}")
    counts = _counts_of(source)
    lhs1 = 0
    lhs2_extra = 0
    t1, t2 = [], []
    for s, n in sorted(counts.items()):
        p = as_pattern(s)
        if p.reduced_norm == j:
            lhs1 += p.sup * n
            t1.append([s, p.sup, n])
        elif p.reduced_norm == j + 1:
            lhs2_extra += 2 * (p.sup - 1) * n
            t2.append([s, p.sup - 1, n])
    return BoundRecord(j, lhs1, lhs1 + lhs2_extra, rhs_m, rhs_dm, t1, t2)


@dataclass
class ObstructionRecord:
    j: int
    max_codim: int
    j_convex: bool
    ranks: dict
    flagged: bool

    def to_dict(self) -> dict:
        return {"j": self.j, "max_codim": self.max_codim, "j_convex": self.j_convex,
                "ranks": {k: {"value": v.value, "provenance": v.provenance}
                          for k, v in self.ranks.items()},
                "flagged": self.flagged}


def convexity_obstruction(source, j: int, ranks: dict[str, RankValue]) -> ObstructionRecord:
    """Flag a positive annotated rank in degree j against a sample with nothing in codim >= j.

    A flag means the sampled metric looks globally j-convex while the
    topology forbids that; it is a red flag about the sample, not a proof.
    """
    if not ranks:
        raise MissingAnnotation(f"no rank annotation supplied for degree {j}")
    counts = _counts_of(source)
    max_codim = max((as_pattern(p).reduced_norm for p, n in counts.items() if n > 0), default=-1)
    j_convex = max_codim < j
    flagged = j_convex and any(r.value > 0 for r in ranks.values())
    return ObstructionRecord(j, max_codim, j_convex, dict(ranks), flagged)


# ---------------------------------------------------------------- filtration

@dataclass
class FiltrationTable:
    depths: list[int]
    interior: np.ndarray                # (depths, copies, nodes) bool
    boundary: np.ndarray
    doubled: bool = False

    @property
    def full(self) -> np.ndarray:
        return self.interior | self.boundary

    def nested(self) -> bool:
        for m in (self.interior, self.boundary, self.full):
            if not np.all(m[1:] <= m[:-1]):
                return False
        return True

    def involution_invariant(self) -> bool:
        if not self.doubled:
            return True
        return all(np.array_equal(m[:, 0], m[:, 1]) for m in (self.interior, self.boundary))


def filtration(atlas: StrataAtlas, max_depth: int | None = None, doubled: bool = False) -> FiltrationTable:
    """Node masks for the depth-d pieces, d = k + 1.

    interior[d]: trajectories with |w|' >= d.  boundary[d]: tangent entry
    nodes (boundary states that are tangency points) whose trajectory has
    |w|' >= d - 1.  The doubled variant carries both copies, swapped by the
    involution.
    """
    rn = np.array([as_pattern(p).reduced_norm if p is not None else -1 for p in atlas.patterns])
    top = int(rn.max(initial=0)) + 1 if max_depth is None else max_depth
    depths = list(range(0, top + 1))
    interior = np.stack([rn >= d for d in depths])
    boundary = np.stack([atlas.tangent_entry & (rn >= d - 1) & (rn >= 0) for d in depths])
    copies = 2 if doubled else 1
    interior = np.repeat(interior[:, None, :], copies, axis=1)
    boundary = np.repeat(boundary[:, None, :], copies, axis=1)
    return FiltrationTable(depths, interior, boundary, doubled)
