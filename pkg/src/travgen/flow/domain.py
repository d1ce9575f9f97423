"""Implicit domains, vector fields and geodesic fields on the unit tangent bundle."""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .. import expr as ex
from .. import jets

SYMBOLIC_OPS_LIMIT = 4000


class DegenerateMetric(ValueError):
    pass


class DomainError(ValueError):
    pass


@dataclass
class ImplicitDomain:
    """``X = {z <= 0}`` inside a bounding box; ``z`` is an expression string."""

    z_text: str
    coords: list[str] = field(default_factory=lambda: ["x", "y"])
    bbox: list[tuple[float, float]] | None = None

    def __post_init__(self):
        self.z_expr = ex.parse(self.z_text, self.coords)
        if self.bbox is None:
            self.bbox = [(-1.0, 1.0)] * len(self.coords)
        self.bbox = [(float(a), float(b)) for a, b in self.bbox]
        if len(self.bbox) != len(self.coords):
            raise DomainError("bounding box dimension does not match coordinates")
        self._z = ex.lambdify(self.z_expr, self.coords)
        grads = [sp.diff(self.z_expr, ex.symbol(c)) for c in self.coords]
        self._grad = [ex.lambdify(g, self.coords) for g in grads]

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def diameter(self) -> float:
        return math.sqrt(sum((b - a) ** 2 for a, b in self.bbox))

    def z(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.broadcast_to(self._z(*pts.T), pts.shape[:1]).astype(float)

    def grad(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        cols = [np.broadcast_to(g(*pts.T), pts.shape[:1]) for g in self._grad]
        return np.stack(cols, axis=1).astype(float)

    def sample_interior(self, n: int, rng) -> np.ndarray:
        lo = np.array([a for a, _ in self.bbox])
        hi = np.array([b for _, b in self.bbox])
        out = []
        total = 0
        for _ in range(1000):
            pts = rng.uniform(lo, hi, size=(max(4 * n, 64), self.dim))
            pts = pts[self.z(pts) < 0]
            out.append(pts)
            total += len(pts)
            if total >= n:
                break
        pts = np.concatenate(out)[:n]
        if len(pts) < n:
            raise DomainError("domain interior not found inside the bounding box")
        return pts

    def check_regular(self, boundary_pts, eps_reg: float = 1e-8) -> np.ndarray:
        """Boolean mask of sampled boundary points where |grad z| >= eps_reg."""
        g = np.linalg.norm(self.grad(boundary_pts), axis=1)
        return g >= eps_reg

    def project_to_boundary(self, pts, iters: int = 30) -> np.ndarray:
        """Newton projection along the gradient onto ``z = 0``."""
        p = np.atleast_2d(np.asarray(pts, dtype=float)).copy()
        for _ in range(iters):
            zv = self.z(p)
            g = self.grad(p)
            gg = np.sum(g * g, axis=1)
            gg[gg == 0] = 1.0
            p -= (zv / gg)[:, None] * g
        return p


@dataclass
class FieldSpec:
    """A vector field on the state space.

    ``kind == "explicit"``: components are expressions in the domain
    coordinates.  ``kind == "geodesic"``: the state is ``(x, y, theta)`` and the
    components come from a planar metric via :func:`geodesic_field`.
    """

    kind: str
    state_coords: list[str]
    components: list
    metric: sp.Matrix | None = None
    reversed: bool = False

    @classmethod
    def explicit(cls, components: list[str], coords: list[str] | None = None) -> "FieldSpec":
        if coords is None:
            coords = ["x", "y"]
        if len(coords) != len(components):
            raise ValueError("explicit field needs one component per coordinate")
        comps = [ex.parse(c, coords) if isinstance(c, str) else sp.sympify(c) for c in components]
        return cls("explicit", list(coords), comps)

    def reverse(self) -> "FieldSpec":
        return FieldSpec(self.kind, self.state_coords, [-c for c in self.components],
                         self.metric, not self.reversed)

    @property
    def spatial_dim(self) -> int:
        return 2 if self.kind == "geodesic" else len(self.state_coords)

    def spatial_direction(self, states) -> np.ndarray:
        """Unit Euclidean direction of motion in the spatial coordinates."""
        states = np.atleast_2d(states)
        if self.kind == "geodesic":
            th = states[:, 2]
            d = np.stack([np.cos(th), np.sin(th)], axis=1)
            return -d if self.reversed else d
        v = FlowSystem.field_values(self, states)
        n = np.linalg.norm(v, axis=1)
        n[n == 0] = 1.0
        return v / n[:, None]


def _metric_matrix(metric) -> sp.Matrix:
    if isinstance(metric, sp.Matrix):
        return metric
    if isinstance(metric, str):
        metric = [[metric, "0"], ["0", metric]]
    rows = [[ex.parse(e, ["x", "y"]) if isinstance(e, str) else sp.sympify(e) for e in row]
            for row in metric]
    g = sp.Matrix(rows)
    if g.shape != (2, 2) or sp.simplify(g - g.T) != sp.zeros(2, 2):
        raise DegenerateMetric("metric must be a symmetric 2x2 matrix")
    return g


def christoffel(g: sp.Matrix) -> list:
    """``Gamma[k][i][j]`` for a metric in coordinates (x, y)."""
    xs = [ex.symbol("x"), ex.symbol("y")]
    ginv = g.inv()
    gam = [[[sp.Integer(0)] * 2 for _ in range(2)] for _ in range(2)]
    for k in range(2):
        for i in range(2):
            for j in range(2):
                s = sum(ginv[k, l] * (sp.diff(g[j, l], xs[i]) + sp.diff(g[i, l], xs[j])
                                      - sp.diff(g[i, j], xs[l])) for l in range(2))
                gam[k][i][j] = sp.simplify(s / 2)
    return gam


def geodesic_field(metric, domain: ImplicitDomain | None = None, eps_pd: float = 1e-9,
                   n_check: int = 400, seed: int = 0) -> FieldSpec:
    """Unit-speed geodesic field on SM of a planar domain, charted as (x, y, theta).

    ``theta`` is the Euclidean angle of the velocity; the velocity is
    ``(cos theta, sin theta) / |(cos theta, sin theta)|_g``.
    """
    g = _metric_matrix(metric)
    if domain is not None:
        fg = ex.lambdify(g, ["x", "y"])
        rng = np.random.default_rng(seed)
        lo = np.array([a for a, _ in domain.bbox[:2]])
        hi = np.array([b for _, b in domain.bbox[:2]])
        pts = rng.uniform(lo, hi, size=(n_check, 2))
        pts = pts[domain.z(pts) <= 0] if domain.coords[:2] == ["x", "y"] else pts
        for px, py in pts:
            m = np.array(fg(px, py), dtype=float)
            if not np.all(np.isfinite(m)) or np.min(np.linalg.eigvalsh(m)) < eps_pd:
                raise DegenerateMetric(f"metric not positive definite at ({px:.4g}, {py:.4g})")
    th = ex.symbol("theta")
    e = sp.Matrix([sp.cos(th), sp.sin(th)])
    speed = sp.sqrt(sp.trigsimp(sp.expand((e.T * g * e)[0, 0])))
    vel = [sp.simplify(e[0] / speed), sp.simplify(e[1] / speed)]
    gam = christoffel(g)
    acc = [-sum(gam[k][i][j] * vel[i] * vel[j] for i in range(2) for j in range(2)) for k in range(2)]
    theta_dot = sp.simplify((vel[0] * acc[1] - vel[1] * acc[0]) / (vel[0] ** 2 + vel[1] ** 2))
    return FieldSpec("geodesic", ["x", "y", "theta"], [vel[0], vel[1], theta_dot], metric=g)


def metric_speed_squared(field: FieldSpec, states) -> np.ndarray:
    """``g(gamma_dot, gamma_dot)`` along states of a geodesic field."""
    if field.metric is None:
        raise ValueError("not a geodesic field")
    states = np.atleast_2d(states)
    v = FlowSystem.field_values(field, states)[:, :2]
    fg = ex.lambdify(field.metric, ["x", "y"])
    out = np.empty(len(states))
    for k, (px, py) in enumerate(states[:, :2]):
        m = np.array(fg(px, py), dtype=float)
        out[k] = v[k] @ m @ v[k]
    return out


def _negated(fn):
    return lambda *a: -np.asarray(fn(*a), dtype=float)


class FlowSystem:
    """Domain + field on a common state space with vectorised evaluators."""

    def __init__(self, domain: ImplicitDomain, field: FieldSpec, max_order: int = 6):
        self.domain = domain
        self.field = field
        self.coords = field.state_coords
        if field.kind == "geodesic":
            if domain.coords != ["x", "y"]:
                raise DomainError("geodesic fields need a planar domain in (x, y)")
        elif domain.coords != field.state_coords:
            raise DomainError("field and domain coordinates differ")
        self.dim = len(self.coords)
        self.max_order = max_order
        self._f = [ex.lambdify(c, self.coords) for c in field.components]
        # Symbolic towers swell fast for non-polynomial fields (geodesic ones
        # especially); past SYMBOLIC_OPS_LIMIT the higher orders come from jets.
        self.tower_exprs = [domain.z_expr]
        for _ in range(max_order):
            nxt = ex.lie_tower(self.tower_exprs[-1], field.components, self.coords, 1)[1]
            if len(self.tower_exprs) >= 2 and sp.count_ops(nxt) > SYMBOLIC_OPS_LIMIT:
                break
            self.tower_exprs.append(nxt)
        self._tower = [ex.lambdify(t, self.coords) for t in self.tower_exprs]
        self.tower_route = "symbolic" if len(self.tower_exprs) > max_order else "jets"
        self._jet_field = list(field.components)
        self._direction = 1.0
        self.length_scale = domain.diameter
        sp_coords = self.coords[: field.spatial_dim]
        gz = [sp.diff(domain.z_expr, ex.symbol(c)) for c in sp_coords]
        self._gradz = [ex.lambdify(g, self.coords) for g in gz]

    def reversed(self) -> "FlowSystem":
        """The same system with ``-v``; towers flip sign at odd orders."""
        other = copy.copy(self)
        other.field = self.field.reverse()
        other._f = [_negated(fn) for fn in self._f]
        other.tower_exprs = [(-1) ** k * t for k, t in enumerate(self.tower_exprs)]
        other._tower = [fn if k % 2 == 0 else _negated(fn) for k, fn in enumerate(self._tower)]
        other._direction = -self._direction
        return other

    def _eval(self, fn, Y):
        # always a fresh writable array: lambdified identities return views of Y
        out = np.array(fn(*Y.T), dtype=float)
        return out if out.shape == Y.shape[:1] else np.full(Y.shape[:1], out)

    def f(self, Y: np.ndarray) -> np.ndarray:
        return np.stack([self._eval(fn, Y) for fn in self._f], axis=1)

    @staticmethod
    def field_values(field: FieldSpec, Y) -> np.ndarray:
        fns = [ex.lambdify(c, field.state_coords) for c in field.components]
        Y = np.atleast_2d(Y)
        return np.stack([np.broadcast_to(np.asarray(fn(*Y.T), dtype=float), Y.shape[:1])
                         for fn in fns], axis=1)

    def z(self, Y: np.ndarray) -> np.ndarray:
        return self._eval(self._tower[0], Y)

    def lz(self, Y: np.ndarray) -> np.ndarray:
        return self._eval(self._tower[1], Y)

    def tower(self, Y: np.ndarray, order: int | None = None) -> np.ndarray:
        """``[z, L z, ..., L^order z]`` per row, by exact differentiation."""
        order = self.max_order if order is None else order
        Y = np.atleast_2d(Y)
        if order < len(self._tower):
            return np.stack([self._eval(self._tower[k], Y) for k in range(order + 1)], axis=1)
        syms = [ex.symbol(c) for c in self.coords]
        T = jets.lie_tower_numeric(self.domain.z_expr, self._jet_field, syms, Y, order)
        return T * (self._direction ** np.arange(order + 1))[None, :]

    def normalised_tower(self, Y: np.ndarray, order: int | None = None) -> np.ndarray:
        """``L^k z * l^(k-1) / (|grad z| |v|^k)``: dimensionless Lie derivatives."""
        T = self.tower(Y, order)
        g = np.linalg.norm(np.stack([self._eval(fn, Y) for fn in self._gradz], axis=1), axis=1)
        v = np.linalg.norm(self.f(Y)[:, : self.field.spatial_dim], axis=1)
        g = np.where(g > 0, g, 1.0)
        v = np.where(v > 0, v, 1.0)
        ell = self.length_scale
        k = np.arange(T.shape[1])
        scale = (ell ** (k - 1.0))[None, :] / (g[:, None] * v[:, None] ** k[None, :])
        return T * scale

    def speed(self, Y) -> np.ndarray:
        return np.linalg.norm(self.f(Y)[:, : self.field.spatial_dim], axis=1)


def local_model_system(j: int, x=None, max_order: int | None = None) -> FlowSystem:
    """The boundary local model of order ``j`` as a domain in (u, x0, ..) with v = d/du."""
    from ..local_models import boundary_local_model

    model = boundary_local_model(j, x)
    coords = ["u"] + [f"x{l}" for l in range(j - 1)]
    dom = ImplicitDomain(model.expression("u", "x"), coords, [(-1.0, 1.0)] * len(coords))
    fld = FieldSpec("explicit", coords, [sp.Integer(1)] + [sp.Integer(0)] * (j - 1))
    return FlowSystem(dom, fld, max_order=max_order or max(6, j + 2))
