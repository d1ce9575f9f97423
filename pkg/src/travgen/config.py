"""Run configuration: an INI-style file read with configparser.

Sections and keys (defaults in brackets)::

    [domain]      name [domain], z (boundary function, X = {z <= 0}),
                  coords [x y], bbox [-1 1 -1 1]  (lo hi per coordinate)
    [field]       kind = geodesic | explicit [geodesic]
                  metric [1]: a conformal factor, or "g11, g12; g12, g22"
                  components: comma-separated expressions (explicit fields)
    [tolerances]  tol_event [1e-11], tol_mult [1e-6], tol_boundary [1e-7], t_max [auto]
    [mesh]        n_points [200], n_angles [51], resolution [512], continuity [0.1],
                  max_failed [0.01], grid_points [16], grid_angles [5]
    [norms]       file [shipped defaults], space [domain name], double_space [D(<space>)]
    [output]      dir [out], seed [0]

Expressions follow the grammar in ``travgen.expr``.  Relative paths are
resolved against the directory of the config file.
"""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .flow import FieldSpec, FlowSystem, ImplicitDomain, Tolerances, geodesic_field


class ConfigError(ValueError):
    pass


_KNOWN = {
    "domain": {"name", "z", "coords", "bbox"},
    "field": {"kind", "metric", "components"},
    "tolerances": {"tol_event", "tol_mult", "tol_boundary", "t_max"},
    "mesh": {"n_points", "n_angles", "resolution", "continuity", "max_failed", "grid_points",
             "grid_angles"},
    "norms": {"file", "space", "double_space"},
    "output": {"dir", "seed"},
}


@dataclass
class RunConfig:
    name: str
    z: str
    coords: list[str]
    bbox: list[tuple[float, float]]
    field_kind: str = "geodesic"
    metric: str = "1"
    components: list[str] = field(default_factory=list)
    tol: Tolerances = field(default_factory=Tolerances)
    n_points: int = 200
    n_angles: int = 51
    resolution: int = 512
    continuity: float = 0.1
    max_failed: float = 0.01
    grid_points: int = 16
    grid_angles: int = 5
    norms_file: Path | None = None
    space: str = ""
    double_space: str = ""
    out_dir: Path = Path("out")
    seed: int = 0
    digest: str = ""

    def build_system(self) -> FlowSystem:
        dom = ImplicitDomain(self.z, self.coords, self.bbox)
        if self.field_kind == "geodesic":
            return FlowSystem(dom, geodesic_field(self._metric_value(), dom, seed=self.seed))
        return FlowSystem(dom, FieldSpec.explicit(self.components, self.coords))

    def _metric_value(self):
        if ";" not in self.metric:
            return self.metric.strip()
        rows = [[e.strip() for e in row.split(",")] for row in self.metric.split(";")]
        if len(rows) != 2 or any(len(r) != 2 for r in rows):
            raise ConfigError("metric matrix must be 'g11, g12; g21, g22'")
        return rows

    def meta(self) -> dict:
        from . import __version__
        return {"tool": "travgen", "version": __version__, "config_hash": self.digest,
                "seed": self.seed, "config_name": self.name}


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{what}: expected numbers, got {text!r}") from None


def _get(cp, sec, key, conv, default, check=None):
    if not cp.has_option(sec, key) or cp.get(sec, key).strip() == "":
        return default
    raw = cp.get(sec, key).strip()
    try:
        val = conv(raw)
    except ValueError:
        raise ConfigError(f"[{sec}] {key}: cannot read {raw!r}") from None
    if check is not None and not check(val):
        raise ConfigError(f"[{sec}] {key}: value {raw!r} out of range")
    return val


def digest_of(cp: configparser.ConfigParser) -> str:
    """Hash of the parsed content, insensitive to comments, ordering and spacing."""
    canon = []
    for sec in sorted(cp.sections()):
        for key in sorted(cp.options(sec)):
            canon.append(f"{sec}.{key}={cp.get(sec, key).strip()}")
    return hashlib.sha256("\n".join(canon).encode()).hexdigest()[:16]


def parse_config(text: str, base_dir: Path | str = ".") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"config syntax: {e}") from None
    for sec in cp.sections():
        if sec not in _KNOWN:
            raise ConfigError(f"unknown section [{sec}]")
        extra = set(cp.options(sec)) - _KNOWN[sec]
        if extra:
            raise ConfigError(f"[{sec}] unknown keys: {sorted(extra)}")
    if not cp.has_option("domain", "z"):
        raise ConfigError("[domain] z is required")
    base = Path(base_dir)
    coords = _get(cp, "domain", "coords", lambda s: s.replace(",", " ").split(), ["x", "y"])
    bbox_flat = _floats(cp.get("domain", "bbox"), "[domain] bbox") if cp.has_option("domain", "bbox") \
        else [-1.0, 1.0] * len(coords)
    if len(bbox_flat) != 2 * len(coords):
        raise ConfigError("[domain] bbox needs lo hi for every coordinate")
    bbox = [(bbox_flat[2 * i], bbox_flat[2 * i + 1]) for i in range(len(coords))]
    if any(lo >= hi for lo, hi in bbox):
        raise ConfigError("[domain] bbox intervals must have lo < hi")
    kind = _get(cp, "field", "kind", str, "geodesic")
    if kind not in ("geodesic", "explicit"):
        raise ConfigError(f"[field] kind must be geodesic or explicit, not {kind!r}")
    comps = _get(cp, "field", "components", lambda s: [c.strip() for c in s.split(",")], [])
    if kind == "explicit" and len(comps) != len(coords):
        raise ConfigError("[field] explicit fields need one component per coordinate")
    pos = lambda v: v > 0  # noqa: E731
    try:
        tol = Tolerances(
            tol_event=_get(cp, "tolerances", "tol_event", float, 1e-11, pos),
            tol_mult=_get(cp, "tolerances", "tol_mult", float, 1e-6, pos),
            tol_boundary=_get(cp, "tolerances", "tol_boundary", float, 1e-7, pos),
            t_max=_get(cp, "tolerances", "t_max", float, None, pos))
    except ValueError as e:
        raise ConfigError(str(e)) from None
    name = _get(cp, "domain", "name", str, "domain")
    norms_file = _get(cp, "norms", "file", str, None)
    space = _get(cp, "norms", "space", str, name)
    cfg = RunConfig(
        name=name, z=cp.get("domain", "z"), coords=coords, bbox=bbox, field_kind=kind,
        metric=_get(cp, "field", "metric", str, "1"), components=comps, tol=tol,
        n_points=_get(cp, "mesh", "n_points", int, 200, lambda v: v >= 8),
        n_angles=_get(cp, "mesh", "n_angles", int, 51, lambda v: v >= 3),
        resolution=_get(cp, "mesh", "resolution", int, 512, lambda v: v >= 32),
        continuity=_get(cp, "mesh", "continuity", float, 0.1, pos),
        max_failed=_get(cp, "mesh", "max_failed", float, 0.01, lambda v: 0 <= v <= 1),
        grid_points=_get(cp, "mesh", "grid_points", int, 16, lambda v: v >= 3),
        grid_angles=_get(cp, "mesh", "grid_angles", int, 5, lambda v: v >= 3),
        norms_file=None if norms_file is None else (base / norms_file),
        space=space, double_space=_get(cp, "norms", "double_space", str, f"D({space})"),
        out_dir=base / _get(cp, "output", "dir", str, "out"),
        seed=_get(cp, "output", "seed", int, 0, lambda v: v >= 0),
        digest=digest_of(cp))
    return cfg


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {p}: {e.strerror}") from None
    return parse_config(text, p.parent)
