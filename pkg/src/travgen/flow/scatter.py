"""Boundary sampling, entry grids, the scattering map and trapping diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from skimage import measure

from .domain import DomainError, FlowSystem, ImplicitDomain
from .integrate import Tolerances, TrajectoryRecord, classify_points, trace


# ---------------------------------------------------------------- boundary curves

def boundary_curves(domain: ImplicitDomain, resolution: int = 512) -> list[np.ndarray]:
    """Closed boundary components of a planar domain as (N, 2) polylines.

    Each curve is projected onto ``z = 0``, oriented counter-clockwise and
    rotated to start at its point of largest x, so output is reproducible.
    """
    if domain.dim != 2:
        raise DomainError("boundary curves are only extracted for planar domains")
    (x0, x1), (y0, y1) = domain.bbox
    xs = np.linspace(x0, x1, resolution)
    ys = np.linspace(y0, y1, resolution)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    Z = domain.z(np.stack([X.ravel(), Y.ravel()], axis=1)).reshape(X.shape)
    if (Z[0, :] <= 0).any() or (Z[-1, :] <= 0).any() or (Z[:, 0] <= 0).any() or (Z[:, -1] <= 0).any():
        raise DomainError("domain touches the bounding box; enlarge bbox")
    curves = []
    for c in measure.find_contours(Z, 0.0):
        pts = np.stack([np.interp(c[:, 0], np.arange(resolution), xs),
                        np.interp(c[:, 1], np.arange(resolution), ys)], axis=1)
        if np.allclose(pts[0], pts[-1]):
            pts = pts[:-1]
        pts = domain.project_to_boundary(pts)
        x, y = pts[:, 0], pts[:, 1]
        area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        if area < 0:
            pts = pts[::-1]
        pts = np.roll(pts, -int(np.argmax(pts[:, 0])), axis=0)
        curves.append(pts)
    curves.sort(key=lambda p: (-_enclosed_area(p), float(p[0, 0])))
    return curves


def _enclosed_area(p: np.ndarray) -> float:
    x, y = p[:, 0], p[:, 1]
    return abs(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def resample_curve(domain: ImplicitDomain, curve: np.ndarray, n: int) -> np.ndarray:
    """``n`` points at equal arc length along a closed curve, on the boundary."""
    closed = np.vstack([curve, curve[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.arange(n) * (s[-1] / n)
    pts = np.stack([np.interp(targets, s, closed[:, 0]), np.interp(targets, s, closed[:, 1])], axis=1)
    return domain.project_to_boundary(pts)


def boundary_points(domain: ImplicitDomain, n: int, resolution: int = 512) -> tuple[np.ndarray, np.ndarray]:
    """Points spread over all boundary components in proportion to length.

    Returns (points, component index per point).
    """
    curves = boundary_curves(domain, resolution)
    lengths = np.array([np.sum(np.linalg.norm(np.diff(np.vstack([c, c[:1]]), axis=0), axis=1))
                        for c in curves])
    counts = np.maximum(4, np.round(n * lengths / lengths.sum()).astype(int))
    pts = [resample_curve(domain, c, k) for c, k in zip(curves, counts)]
    comp = np.concatenate([np.full(len(p), i) for i, p in enumerate(pts)])
    return np.concatenate(pts), comp


def inward_normal(domain: ImplicitDomain, pts) -> np.ndarray:
    g = domain.grad(pts)
    return -g / np.linalg.norm(g, axis=1)[:, None]


# ---------------------------------------------------------------- entry grids

def geodesic_entries(domain: ImplicitDomain, n_points: int, n_angles: int,
                     resolution: int = 512) -> np.ndarray:
    """States (x, y, theta) on the boundary with direction within 90 degrees of inward.

    Angles run over ``[-pi/2, pi/2]`` from the inward normal, endpoints
    included: those two are the tangent entries.
    """
    pts, _ = boundary_points(domain, n_points, resolution)
    nrm = inward_normal(domain, pts)
    base = np.arctan2(nrm[:, 1], nrm[:, 0])
    phis = np.linspace(-np.pi / 2, np.pi / 2, n_angles)
    th = (base[:, None] + phis[None, :]).ravel()
    xy = np.repeat(pts, n_angles, axis=0)
    return np.column_stack([xy, th])


def explicit_entries(system: FlowSystem, n_points: int, resolution: int = 512,
                     tol: Tolerances | None = None) -> np.ndarray:
    """Boundary points where an explicit planar field points inward or is tangent.

    Points where ``L_v z`` changes sign along the boundary are located by
    bisection along the curve and inserted, so tangent entries are sampled.
    """
    tol = tol or Tolerances()
    domain = system.domain
    out = []
    for curve in boundary_curves(domain, resolution):
        k = max(8, int(round(n_points * len(curve) / max(1, resolution))))
        pts = resample_curve(domain, curve, k)
        lz = system.lz(pts)
        keep = [p for p, v in zip(pts, lz) if v <= 0]
        nxt = np.roll(pts, -1, axis=0)
        lz_n = np.roll(lz, -1)
        for a, b, va, vb in zip(pts, nxt, lz, lz_n):
            if va * vb < 0:
                keep.append(_boundary_root(system, a, b, va))
        out.extend(keep)
    if not out:
        raise DomainError("field has no inward boundary points")
    E = np.array(out)
    m, sign, _ = classify_points(system, E, tol)
    # tangent points that are exits of their own trajectories (odd m, sign +) are dropped
    drop = (m % 2 == 1) & (sign > 0)
    return E[~drop]


def _boundary_root(system: FlowSystem, a, b, va, iters: int = 60) -> np.ndarray:
    domain = system.domain
    for _ in range(iters):
        mid = domain.project_to_boundary(0.5 * (a + b))[0]
        vm = system.lz(mid[None, :])[0]
        if np.sign(vm) == np.sign(va):
            a, va = mid, vm
        else:
            b = mid
    return domain.project_to_boundary(0.5 * (a + b))[0]


# ---------------------------------------------------------------- scattering

@dataclass
class ScatteringSample:
    entry: tuple[float, ...]
    exit: tuple[float, ...]
    flight_time: float
    pattern: str

    def entry_point(self):
        return self.entry[:2]

    def exit_point(self):
        return self.exit[:2]


@dataclass
class ScatteringResult:
    samples: list[ScatteringSample] = field(default_factory=list)
    sample_index: list[int] = field(default_factory=list)
    trapped: list[int] = field(default_factory=list)
    failed: list[tuple[int, str]] = field(default_factory=list)
    records: list[TrajectoryRecord] = field(default_factory=list)


def scattering_map(system: FlowSystem, entries, tol: Tolerances | None = None) -> ScatteringResult:
    """Entry-to-exit correspondence for states on the inward/tangent boundary.

    Per-entry failures never abort the run: trapped entries (no exit within
    the budget) and other failures are listed separately.
    """
    tol = tol or Tolerances()
    E = np.atleast_2d(np.asarray(entries, dtype=float))
    res = ScatteringResult()
    if len(E) == 0:
        return res
    zs = np.abs(system.normalised_tower(E, 1)[:, 0])
    m, sign, _ = classify_points(system, E, tol)
    good = zs <= tol.tol_boundary
    outward = (m % 2 == 1) & (sign > 0)
    idx = np.nonzero(good & ~outward)[0]
    for i in np.nonzero(~good)[0]:
        res.failed.append((int(i), "entry not on the boundary"))
    for i in np.nonzero(good & outward)[0]:
        res.failed.append((int(i), "entry points outward"))
    recs = trace(system, E[idx], tol)
    res.records = recs
    for i, rec in zip(idx, recs):
        if rec.status == "budget":
            res.trapped.append(int(i))
        elif rec.status != "ok":
            res.failed.append((int(i), rec.message or rec.status))
        else:
            ev = rec.events[-1]
            res.samples.append(ScatteringSample(tuple(map(float, E[i])), ev.state,
                                                ev.time - rec.entry_time, str(rec.pattern)))
            res.sample_index.append(int(i))
    return res


def reversal_errors(system: FlowSystem, samples: list[ScatteringSample],
                    tol: Tolerances | None = None) -> np.ndarray:
    """Distance between each entry and the reversed flow's image of its exit.

    Angles are compared on the circle.
    """
    tol = tol or Tolerances()
    if not samples:
        return np.zeros(0)
    back = system.reversed()
    X = np.array([s.exit for s in samples])
    recs = trace(back, X, tol)
    out = np.full(len(samples), np.inf)
    for k, (s, rec) in enumerate(zip(samples, recs)):
        if rec.status != "ok":
            continue
        got = np.array(rec.events[-1].state)
        want = np.array(s.entry)
        d = got - want
        if system.field.kind == "geodesic":
            d[2] = np.angle(np.exp(1j * d[2]))
        out[k] = float(np.max(np.abs(d)))
    return out


# ---------------------------------------------------------------- trapping

@dataclass
class TraversingReport:
    n_samples: int
    n_exit: int
    n_failed: int
    trapped_witnesses: list[tuple[float, ...]]

    @property
    def exit_fraction(self) -> float:
        return self.n_exit / self.n_samples if self.n_samples else 1.0

    @property
    def traversing(self) -> bool:
        return not self.trapped_witnesses


def random_states(system: FlowSystem, n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    pts = system.domain.sample_interior(n, rng)
    if system.field.kind == "geodesic":
        pts = np.column_stack([pts, rng.uniform(-np.pi, np.pi, n)])
    return pts


def traversing_report(system: FlowSystem, n_samples: int = 200, seed: int = 0,
                      tol: Tolerances | None = None, max_witnesses: int = 10) -> TraversingReport:
    """Flow random interior states both ways; any budget overrun is a trapped witness."""
    tol = tol or Tolerances()
    S = random_states(system, n_samples, seed)
    recs = trace(system, S, tol)
    n_exit = sum(r.status == "ok" for r in recs)
    trapped = [r.entry_state for r in recs if r.status == "budget"]
    n_failed = sum(r.status not in ("ok", "budget") for r in recs)
    return TraversingReport(n_samples, n_exit, n_failed, trapped[:max_witnesses])
