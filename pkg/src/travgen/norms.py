"""Registry of simplicial seminorm annotations and the vanishing/additivity rules.

Nothing here computes a simplicial seminorm from a triangulation.  An
annotation records, for one space and one homology degree, the rank of
H_j, a basis of the classes with vanishing seminorm (coordinates in the
same homology basis the caller uses), optional named class values, and a
provenance string saying which rule or citation produced it.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from math import comb
from pathlib import Path

from .stratification import MissingAnnotation, RankValue


class RegistryConflict(ValueError):
    pass


class UnknownAnnotation(KeyError):
    pass


class UnsupportedConstructor(ValueError):
    pass


def _rank(vectors) -> int:
    rows = [[Fraction(x) for x in v] for v in vectors]
    r = 0
    ncols = len(rows[0]) if rows else 0
    for c in range(ncols):
        p = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if p is None:
            continue
        rows[r], rows[p] = rows[p], rows[r]
        for i in range(r + 1, len(rows)):
            f = rows[i][c] / rows[r][c]
            if f:
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        r += 1
    return r


@dataclass(frozen=True)
class NormAnnotation:
    space: str
    degree: int
    provenance: str
    rank: int | None = None                      # rank of H_degree, if known
    zero_basis: tuple | None = None              # classes with vanishing seminorm
    lower_bound: int | None = None               # independent nonzero classes, if only that is known
    values: tuple = ()                           # ((class label, value), ...)
    exact_values: bool = True

    def __post_init__(self):
        if not self.provenance or not self.provenance.strip():
            raise MissingAnnotation(f"annotation {self.id} has no provenance")
        if self.rank is not None and self.rank < 0:
            raise ValueError("rank must be non-negative")
        if self.zero_basis is not None:
            if self.rank is None:
                raise ValueError("a zero subspace needs the rank of the ambient group")
            zb = tuple(tuple(Fraction(x) for x in v) for v in self.zero_basis)
            if any(len(v) != self.rank for v in zb):
                raise ValueError(f"zero-subspace vectors must have length {self.rank}")
            object.__setattr__(self, "zero_basis", zb)
        for label, v in self.values:
            if v < 0:
                raise ValueError(f"negative seminorm for {label!r}")

    @property
    def id(self) -> str:
        return f"{self.space}:H{self.degree}"

    @property
    def zero_dim(self) -> int | None:
        return None if self.zero_basis is None else _rank(self.zero_basis)

    def value(self, label: str):
        for k, v in self.values:
            if k == label:
                return v
        raise UnknownAnnotation(f"{self.id} has no value for {label!r}")

    def contains_zero(self, vec) -> bool:
        """True if the class lies in the annotated zero subspace."""
        if self.zero_basis is None:
            raise MissingAnnotation(f"{self.id} has no zero subspace")
        base = _rank(self.zero_basis)
        return _rank(list(self.zero_basis) + [list(vec)]) == base

    def to_json(self) -> dict:
        d = {"space": self.space, "degree": self.degree, "provenance": self.provenance}
        if self.rank is not None:
            d["rank"] = self.rank
        if self.zero_basis is not None:
            d["zero_basis"] = [[str(x) for x in v] for v in self.zero_basis]
        if self.lower_bound is not None:
            d["lower_bound"] = self.lower_bound
        if self.values:
            d["values"] = {k: _num_out(v) for k, v in self.values}
            d["exact_values"] = self.exact_values
        return d

    @classmethod
    def from_json(cls, d: dict) -> "NormAnnotation":
        zb = d.get("zero_basis")
        if zb == "all":
            zb = [[int(i == k) for i in range(d["rank"])] for k in range(d["rank"])]
        vals = tuple(sorted((k, _num_in(v)) for k, v in d.get("values", {}).items()))
        return cls(d["space"], int(d["degree"]), d.get("provenance", ""), d.get("rank"),
                   None if zb is None else tuple(tuple(Fraction(x) for x in v) for v in zb),
                   d.get("lower_bound"), vals, d.get("exact_values", True))


def _num_out(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else int(v)
    return v


def _num_in(v):
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, int):
        return Fraction(v)
    return v


def reduced_rank(annotation: NormAnnotation | None, degree: int | None = None) -> RankValue:
    """rank H_j minus the dimension of the zero subspace, with provenance.

    When only a count of independent nonzero classes is annotated the result
    is a lower bound (``exact=False``).
    """
    if annotation is None:
        raise MissingAnnotation(f"no annotation for degree {degree}")
    if degree is not None and degree != annotation.degree:
        raise MissingAnnotation(f"{annotation.id} does not describe degree {degree}")
    if annotation.rank is not None and annotation.zero_basis is not None:
        return RankValue(annotation.rank - annotation.zero_dim, annotation.provenance, True)
    if annotation.lower_bound is not None:
        return RankValue(annotation.lower_bound, annotation.provenance, False)
    raise MissingAnnotation(f"{annotation.id} has neither a zero subspace nor a lower bound")


# ---------------------------------------------------------------- registry

class NormRegistry:
    def __init__(self, constants: dict | None = None):
        self._store: dict[str, NormAnnotation] = {}
        self.constants: dict[str, dict] = dict(constants or {})

    def register(self, ann: NormAnnotation) -> None:
        old = self._store.get(ann.id)
        if old is not None:
            if old == ann:
                return
            raise RegistryConflict(f"conflicting annotation for {ann.id}")
        self._store[ann.id] = ann

    def lookup(self, space: str, degree: int) -> NormAnnotation:
        key = f"{space}:H{degree}"
        if key not in self._store:
            raise UnknownAnnotation(f"no annotation registered for {key}")
        return self._store[key]

    def get(self, space: str, degree: int) -> NormAnnotation | None:
        return self._store.get(f"{space}:H{degree}")

    def __contains__(self, key) -> bool:
        return key in self._store

    def __len__(self) -> int:
        return len(self._store)

    def ids(self) -> list[str]:
        return sorted(self._store)

    def constant(self, name: str) -> float:
        if name not in self.constants:
            raise UnknownAnnotation(f"constant {name!r} is not in the data file")
        return self.constants[name]["value"]

    def to_json(self) -> dict:
        return {"version": 1, "constants": self.constants,
                "annotations": [self._store[k].to_json() for k in self.ids()]}

    @classmethod
    def from_json(cls, d: dict) -> "NormRegistry":
        reg = cls(d.get("constants"))
        for a in d.get("annotations", []):
            reg.register(NormAnnotation.from_json(a))
        return reg


def load_registry(path: str | Path | None = None) -> NormRegistry:
    """Registry from a JSON file, or the shipped defaults when ``path`` is None."""
    if path is None:
        text = resources.files("travgen.data").joinpath("norms.json").read_text()
    else:
        text = Path(path).read_text()
    return NormRegistry.from_json(json.loads(text))


# ---------------------------------------------------------------- rules

def _hyperbolic_constant(reg: NormRegistry, n: int) -> float:
    return reg.constant(f"v_{n}")


def _top_value(desc: dict, reg: NormRegistry):
    """(seminorm of the fundamental class, exact?, provenance) of a closed oriented manifold."""
    ann = apply_rules(desc, reg)
    if ann.degree != space_dim(desc) or not ann.values:
        raise UnsupportedConstructor(f"no fundamental-class value for {desc.get('kind')!r}")
    return ann.values[0][1], ann.exact_values, ann.provenance


def space_dim(desc: dict) -> int:
    kind = desc.get("kind")
    if kind == "surface":
        return 2
    if kind == "surface_sphere_sum":
        return 4
    if kind in ("connected_sum", "punctured_double"):
        subs = desc.get("summands") or [desc["of"]]
        return space_dim(subs[0])
    if "dim" in desc:
        return int(desc["dim"])
    raise UnsupportedConstructor(f"cannot read the dimension of {kind!r}")


def space_name(desc: dict) -> str:
    if "name" in desc:
        return desc["name"]
    kind = desc.get("kind")
    if kind == "surface":
        return f"surface_g{desc['genus']}"
    if kind == "connected_sum":
        return "#".join(space_name(s) for s in desc["summands"])
    if kind == "punctured_double":
        n = space_name(desc["of"])
        return f"{n}#{n}"
    return kind


def apply_rules(desc: dict, registry: NormRegistry | None = None, degree: int | None = None) -> NormAnnotation:
    """Annotation for one homology degree of a described space (top degree by default).

    Constructors: surface, torus, amenable, hyperbolic, connected_sum,
    punctured_double, spherical_fibration, surface_sphere_sum.
    """
    reg = registry if registry is not None else load_registry()
    kind = desc.get("kind")
    n = space_dim(desc)
    if degree is not None:
        d = degree
    else:
        d = 2 if kind == "surface_sphere_sum" else n
    name = space_name(desc)
    if d == 0:
        return NormAnnotation(name, 0, "point class of a connected space has seminorm 1",
                              1, (), None, (("point", Fraction(1)),))
    if d == 1 and kind not in ("surface_sphere_sum",):
        rank = desc.get("betti", {}).get(1) if isinstance(desc.get("betti"), dict) else None
        if kind == "surface":
            rank = 2 * desc["genus"]
        if kind == "torus":
            rank = n
        if rank is None:
            raise UnsupportedConstructor(f"first Betti number of {name!r} is not given")
        return NormAnnotation(name, 1, "degree-one classes have vanishing seminorm", rank,
                              tuple(tuple(int(i == k) for i in range(rank)) for k in range(rank)))

    if kind == "surface":
        if d != 2:
            raise UnsupportedConstructor("surfaces have homology in degrees 0..2 only")
        g = int(desc["genus"])
        v = Fraction(max(0, 4 * g - 4))
        zero = () if v else ((1,),)
        return NormAnnotation(name, 2, "closed surface of genus g: seminorm max(0, 4g - 4)",
                              1, zero, None, (("fundamental", v),))

    if kind in ("torus", "amenable"):
        if kind == "torus":
            rank = comb(n, d)
        else:
            betti = desc.get("betti") or {}
            rank = betti.get(d, betti.get(str(d)))
            if rank is None:
                raise UnsupportedConstructor(f"Betti number b_{d} of {name!r} is not given")
        vals = (("fundamental", Fraction(0)),) if d == n else ()
        return NormAnnotation(name, d, "amenable fundamental group: positive-degree classes vanish",
                              rank, tuple(tuple(int(i == k) for i in range(rank)) for k in range(rank)),
                              None, vals)

    if kind == "hyperbolic":
        if d != n:
            raise UnsupportedConstructor("hyperbolic rule covers the fundamental class only")
        vn = _hyperbolic_constant(reg, n)
        v = float(desc["volume"]) / vn
        return NormAnnotation(name, n, f"closed hyperbolic {n}-manifold: volume / v_{n}",
                              1, (), None, (("fundamental", v),), exact_values=False)

    if kind in ("connected_sum", "punctured_double"):
        subs = desc["summands"] if kind == "connected_sum" else [desc["of"], desc["of"]]
        if d != n:
            raise UnsupportedConstructor("connected-sum rule covers the fundamental class only")
        if n == 2:
            if not all(s.get("kind") == "surface" for s in subs):
                raise UnsupportedConstructor("two-dimensional connected sums must be of surfaces")
            g = sum(int(s["genus"]) for s in subs)
            ann = apply_rules({"kind": "surface", "genus": g, "name": name}, reg)
            return ann
        tops = [_top_value(s, reg) for s in subs]
        v = sum(t[0] for t in tops)
        exact = all(t[1] for t in tops)
        prov = (f"connected sum in dimension {n} >= 3: seminorms add ("
                + "; ".join(t[2] for t in tops) + ")")
        zero = ((1,),) if v == 0 else ()
        return NormAnnotation(name, n, prov, 1, zero, None, (("fundamental", v),), exact)

    if kind == "spherical_fibration":
        if d != n:
            raise UnsupportedConstructor("fibration rule covers the fundamental class only")
        if int(desc.get("fiber_dim", 1)) < 1:
            raise UnsupportedConstructor("fiber sphere must have positive dimension")
        return NormAnnotation(name, n, "total space of a sphere bundle: fundamental class vanishes",
                              1, ((1,),), None, (("fundamental", Fraction(0)),))

    if kind == "surface_sphere_sum":
        # connected sum of surface x S^2 pieces with amenable-boundary holes removed
        gs = [int(g) for g in desc["genera"]]
        if any(g < 2 for g in gs):
            raise UnsupportedConstructor("surface pieces must have genus >= 2")
        if d != 2:
            raise UnsupportedConstructor("surface-sphere rule covers degree 2 only")
        copies = 2 if desc.get("doubled") else 1
        h = Fraction(sum(2 * g - 2 for g in gs))
        return NormAnnotation(name, 2,
                              "surfaces of genus >= 2 in a connected sum of surface x sphere pieces "
                              "stay independent modulo vanishing classes",
                              None, None, copies * len(gs), (("sum_of_surfaces", h),))

    raise UnsupportedConstructor(f"unknown constructor {kind!r}")
