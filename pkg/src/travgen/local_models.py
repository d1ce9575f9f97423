"""Polynomial normal forms of the boundary near a trajectory.

``ModelPolynomial`` is a product of factors ``(u - c)^j + sum_l x_l (u - c)^l``
(no ``(u - c)^(j-1)`` term).  The region ``{p <= 0}`` on the u-line splits
into trajectories; each carries the ordered root multiplicities as a pattern.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .omega import Pattern, as_pattern, is_admissible


class IllConditioned(ArithmeticError):
    """Root clustering (or multiplicity detection) is ambiguous at the given scale."""


@dataclass(frozen=True)
class Factor:
    center: float
    degree: int
    coeffs: tuple[float, ...]  # x_0 .. x_{degree-2}

    def __post_init__(self):
        c = [0.0] * (self.degree + 1)
        c[0] = 1.0
        for l, x in enumerate(self.coeffs):
            c[self.degree - l] = float(x)
        object.__setattr__(self, "_poly", tuple(c))

    def poly(self) -> np.ndarray:
        """Coefficients in the shifted variable w = u - center, highest first."""
        return np.array(self._poly)

    def __call__(self, u):
        w = np.asarray(u, dtype=float) - self.center
        return np.polyval(self.poly(), w)


@dataclass(frozen=True)
class ModelPolynomial:
    factors: tuple[Factor, ...]
    pattern: Pattern | None = None

    @classmethod
    def from_pattern(cls, omega, deformation: dict | None = None) -> "ModelPolynomial":
        """Model for ``omega`` with deformation ``{(i, l): x_il}``; roots at u = 1, 2, ..."""
        p = as_pattern(omega)
        deformation = dict(deformation or {})
        factors = []
        for i, j in enumerate(p.entries, start=1):
            coeffs = []
            for l in range(j - 1):
                coeffs.append(float(deformation.pop((i, l), 0.0)))
            factors.append(Factor(float(i), j, tuple(coeffs)))
        if deformation:
            raise KeyError(f"deformation keys outside the model: {sorted(deformation)}")
        return cls(tuple(factors), p)

    @property
    def degree(self) -> int:
        return sum(f.degree for f in self.factors)

    @property
    def deformation(self) -> dict[tuple[int, int], float]:
        return {
            (i, l): x
            for i, f in enumerate(self.factors, start=1)
            for l, x in enumerate(f.coeffs)
        }

    @property
    def n_coordinates(self) -> int:
        return sum(max(f.degree - 1, 0) for f in self.factors)

    def coefficient_scale(self) -> float:
        vals = [abs(x) for f in self.factors for x in f.coeffs]
        return max([1.0] + vals)

    def to_json(self) -> str:
        if self.pattern is None:
            raise ValueError("only pattern models serialize")
        defo = {f"{i},{l}": x for (i, l), x in sorted(self.deformation.items()) if x != 0.0}
        return json.dumps({"pattern": list(self.pattern.entries), "deformation": defo})

    @classmethod
    def from_json(cls, text: str) -> "ModelPolynomial":
        doc = json.loads(text)
        defo = {}
        for key, val in doc.get("deformation", {}).items():
            i, l = (int(t) for t in key.split(","))
            defo[(i, l)] = float(val)
        return cls.from_pattern(doc["pattern"], defo)

    def expression(self, var: str = "u", coord_prefix: str = "x") -> str:
        """The polynomial as a string; deformation coordinates become free symbols.

        For a single factor, coordinate ``x_l`` is named ``{coord_prefix}{l}``.
        """
        terms = []
        for i, f in enumerate(self.factors, start=1):
            w = f"({var} - {f.center!r})" if f.center else var
            parts = [f"{w}^{f.degree}"]
            for l in range(f.degree - 1):
                name = f"{coord_prefix}{l}" if len(self.factors) == 1 else f"{coord_prefix}{i}_{l}"
                parts.append(f"{name}*{w}^{l}")
            terms.append("(" + " + ".join(parts) + ")")
        return "*".join(terms)


def evaluate(model: ModelPolynomial, u):
    """Value of the model polynomial at ``u`` (scalar or array)."""
    out = np.ones_like(np.asarray(u, dtype=float))
    for f in model.factors:
        out = out * f(u)
    return out if np.ndim(out) else float(out)


def boundary_local_model(j: int, x=None) -> ModelPolynomial:
    """Single-factor model ``u^j + sum_{l <= j-2} x_l u^l`` centred at 0."""
    if j < 1:
        raise ValueError("j must be >= 1")
    x = tuple(float(v) for v in (x if x is not None else [0.0] * (j - 1)))
    if len(x) != j - 1:
        raise ValueError(f"expected {j - 1} deformation coordinates, got {len(x)}")
    pat = Pattern((j,)) if is_admissible((j,)) else None
    return ModelPolynomial((Factor(0.0, j, x),), pat)


def default_tolerance(model: ModelPolynomial) -> float:
    return max(1e-8, 1e-6 * model.coefficient_scale())


# ---------------------------------------------------------------- roots

@dataclass(frozen=True)
class Root:
    u: float
    multiplicity: int


def _cluster(points: np.ndarray, tol: float) -> list[list[int]]:
    n = len(points)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in itertools.combinations(range(n), 2):
        d = abs(points[a] - points[b])
        if tol / 2 <= d <= 2 * tol:
            raise IllConditioned(
                f"roots {points[a]:.3g} and {points[b]:.3g} are {d:.3g} apart, "
                f"within a factor 2 of the clustering scale {tol:.3g}"
            )
        if d < tol / 2:
            parent[find(a)] = find(b)
    groups: dict[int, list[int]] = {}
    for a in range(n):
        groups.setdefault(find(a), []).append(a)
    return sorted(groups.values(), key=lambda g: (points[g].real.mean(), points[g].imag.mean()))


def _horner(coeffs, w: float) -> tuple[float, float]:
    """Value and derivative of a polynomial (highest degree first) at w."""
    val, der = 0.0, 0.0
    for c in coeffs:
        der = der * w + val
        val = val * w + c
    return val, der


def _value_and_derivative(model: ModelPolynomial, u: float) -> tuple[float, float]:
    val, der = 1.0, 0.0
    for f in model.factors:
        fv, fd = _horner(f._poly, u - f.center)
        der = der * fv + val * fd
        val = val * fv
    return val, der


def real_roots(model: ModelPolynomial, tol: float | None = None) -> list[Root]:
    """Real roots with multiplicities.

    Companion-matrix eigenvalues per factor, single-linkage clustering in the
    complex plane at scale ``tol``, then one multiplicity-aware Newton step.
    Non-real clusters are dropped; their total multiplicity must be even.
    """
    tol = default_tolerance(model) if tol is None else tol
    eig = []
    for f in model.factors:
        r = np.roots(f.poly()) if f.degree > 0 else np.array([])
        eig.extend(complex(z) + f.center for z in r)
    pts = np.array(eig, dtype=complex)
    roots = []
    n_complex = 0
    for g in _cluster(pts, tol):
        c = pts[g].mean()
        m = len(g)
        if abs(c.imag) > tol:
            n_complex += m
            continue
        u = c.real
        val, der = _value_and_derivative(model, u)
        if der != 0.0:
            cand = u - m * val / der
            if abs(cand - u) < tol / 2 and abs(_value_and_derivative(model, cand)[0]) <= abs(val):
                u = cand
        roots.append(Root(float(u), m))
    if n_complex % 2:
        raise IllConditioned("odd number of non-real roots")
    if sum(r.multiplicity for r in roots) + n_complex != model.degree:
        raise IllConditioned("multiplicities do not sum to the degree")
    roots.sort(key=lambda r: r.u)
    return roots


# ---------------------------------------------------------------- divisors

@dataclass(frozen=True)
class Trajectory:
    left: float
    right: float
    roots: tuple[Root, ...]

    @property
    def pattern(self) -> Pattern:
        return Pattern(r.multiplicity for r in self.roots)


@dataclass
class ModelDivisor:
    trajectories: list[Trajectory] = field(default_factory=list)

    @property
    def patterns(self) -> list[Pattern]:
        return [t.pattern for t in self.trajectories]

    def to_json(self) -> str:
        return json.dumps([
            {
                "interval": [t.left, t.right],
                "roots": [[r.u, r.multiplicity] for r in t.roots],
                "pattern": list(t.pattern.entries),
            }
            for t in self.trajectories
        ])


def split_sublevel(roots: list[Root]) -> list[Trajectory]:
    """Connected components of ``{p <= 0}`` for a monic polynomial with these real roots."""
    out = []
    current: list[Root] = []
    to_right = sum(r.multiplicity for r in roots)
    for r in roots:
        to_right -= r.multiplicity
        sign_right = -1 if to_right % 2 else 1
        sign_left = -sign_right if r.multiplicity % 2 else sign_right
        current.append(r)
        if sign_right > 0:
            if sign_left > 0 and len(current) > 1:
                raise AssertionError("sign bookkeeping broke")
            out.append(Trajectory(current[0].u, r.u, tuple(current)))
            current = []
    if current:
        raise AssertionError("unterminated negative interval")
    return out


def trajectories_at(model: ModelPolynomial, tol: float | None = None) -> ModelDivisor:
    """Split the u-line into maximal intervals where the model is <= 0."""
    tol = default_tolerance(model) if tol is None else tol
    if tol <= 0:
        raise ValueError("tol must be positive")
    roots = real_roots(model, tol)
    trajs = split_sublevel(roots)
    # cross-check the parity bookkeeping against direct evaluation where it is safe
    for a, b in zip(roots, roots[1:]):
        mid = 0.5 * (a.u + b.u)
        val = _value_and_derivative(model, mid)[0]
        if abs(val) < 1e3 * np.finfo(float).eps * model.coefficient_scale():
            continue
        inside = any(t.left <= mid <= t.right for t in trajs)
        if inside != (val < 0):
            raise IllConditioned(f"sign analysis disagrees with evaluation at u={mid:.6g}")
    return ModelDivisor(trajs)


# ---------------------------------------------------------------- sampling oracle

class ReachableSet(frozenset):
    """Frozen set of patterns that also records how it was sampled."""

    budget: int
    seed: int
    n_samples: int
    n_skipped: int

    def __new__(cls, items, *, budget, seed, n_samples, n_skipped):
        obj = super().__new__(cls, items)
        obj.budget = budget
        obj.seed = seed
        obj.n_samples = n_samples
        obj.n_skipped = n_skipped
        return obj


def _real_layouts(j: int) -> list[tuple[int, ...]]:
    """Ordered real-root multiplicity layouts a degree-j factor can take."""
    out = []

    def rec(prefix, remaining):
        if (j - sum(prefix)) % 2 == 0:
            out.append(tuple(prefix))
        for k in range(1, remaining + 1):
            rec(prefix + [k], remaining - k)

    rec([], j)
    return out


def _layout_coefficients(j, layout, radius, rng) -> tuple[float, ...]:
    """Coefficients of a centred degree-j factor whose real roots follow ``layout``."""
    if j == 1:
        return ()
    for _ in range(200):
        k = len(layout)
        real = np.sort(rng.uniform(-1.0, 1.0, size=k))
        if k > 1 and np.min(np.diff(real)) < 0.15:
            continue
        roots = [complex(r) for r, m in zip(real, layout) for _ in range(m)]
        for _ in range((j - sum(layout)) // 2):
            a, b = rng.uniform(-1.0, 1.0), rng.uniform(0.2, 1.0)
            roots += [complex(a, b), complex(a, -b)]
        shift = sum(roots) / j
        roots = [r - shift for r in roots]
        c = np.real(np.poly(roots))
        # scale roots by lam so every |coefficient| fits in 0.9 * radius
        lam = 1.0
        for l in range(j - 1):
            cl = abs(c[j - l])
            if cl > 0:
                lam = min(lam, (0.9 * radius / cl) ** (1.0 / (j - l)))
        return tuple(float(c[j - l] * lam ** (j - l)) for l in range(j - 1))
    raise RuntimeError("could not place roots")


def reachable_patterns(omega, radius: float = 0.1, budget: int = 10_000, seed: int = 0,
                       tol: float = 1e-3) -> ReachableSet:
    """Patterns seen as trajectories of small deformations of the model of ``omega``.

    Samples: the centre, stratified root layouts per factor (these reach the
    positive-codimension strata that uniform sampling misses), a coarse grid,
    and uniform random points in the sup-norm ball of the given radius.
    """
    p = as_pattern(omega)
    if radius <= 0 or radius >= 0.5:
        raise ValueError("radius must lie in (0, 0.5)")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    keys = [(i, l) for i, j in enumerate(p.entries, start=1) for l in range(j - 1)]
    samples: list[dict] = [{}]

    if keys:
        layouts = [_real_layouts(j) for j in p.entries]
        combos = list(itertools.product(*layouts))
        per = max(1, (budget // 2) // max(len(combos), 1))
        for combo in combos:
            for _ in range(per):
                defo = {}
                for i, (j, lay) in enumerate(zip(p.entries, combo), start=1):
                    for l, x in enumerate(_layout_coefficients(j, lay, radius, rng)):
                        defo[(i, l)] = x
                samples.append(defo)
        remaining = max(budget - len(samples), 0)
        dim = len(keys)
        side = max(2, int(round((remaining / 2) ** (1.0 / dim))))
        side = min(side, 11)
        ticks = np.linspace(-radius, radius, side)
        for pt in itertools.product(ticks, repeat=dim):
            if len(samples) >= budget // 2 + len(combos) * per:
                break
            samples.append(dict(zip(keys, map(float, pt))))
        while len(samples) < budget:
            samples.append(dict(zip(keys, map(float, rng.uniform(-radius, radius, size=dim)))))

    found = set()
    skipped = 0
    for defo in samples[:max(budget, 1)]:
        model = ModelPolynomial.from_pattern(p, defo)
        try:
            div = trajectories_at(model, tol)
        except IllConditioned:
            skipped += 1
            continue
        found.update(div.patterns)
    return ReachableSet(found, budget=budget, seed=seed, n_samples=min(len(samples), budget),
                        n_skipped=skipped)
