"""Run orchestration shared by the CLI and the acceptance suite."""
from __future__ import annotations

import math
import re
from pathlib import Path

import numpy as np

from .config import RunConfig
from .exact_lp import DimensionCapExceeded
from .flow import Tolerances, trace
from .flow.cache import write_cache, write_jsonl
from .flow.scatter import geodesic_entries, reversal_errors, scattering_map
from .mho import StratificationDefect, atlas_complex, build_mho
from .norms import NormRegistry, load_registry, reduced_rank
from .reports import (check_provenance, counts_csv, dumps_json, emit_polytope, entry_chart_svg,
                      write_atomic)
from .stratification import (MissingAnnotation, build_atlas, check_k_convexity,
                             convexity_obstruction, morse_bound_report)

_VEC = r"\(([^()]*)\)"
_ENTRY = re.compile(rf"^\s*{_VEC}\s*(?:dir\s*{_VEC})?\s*$")


def _numbers(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise ValueError(f"not a list of numbers: {text!r}") from None


def parse_entry(text: str, kind: str) -> np.ndarray:
    """State from '(x,y) dir (dx,dy)'; geodesic states get theta = atan2(dy, dx)."""
    m = _ENTRY.match(text)
    if not m:
        raise ValueError(f"cannot parse entry {text!r}; expected '(x,y) dir (dx,dy)'")
    pt = _numbers(m.group(1))
    if kind == "geodesic":
        if m.group(2) is None:
            raise ValueError("geodesic entries need a direction: '(x,y) dir (dx,dy)'")
        d = _numbers(m.group(2))
        if len(pt) != 2 or len(d) != 2 or d == [0.0, 0.0]:
            raise ValueError("geodesic entries need a planar point and a nonzero direction")
        return np.array([pt[0], pt[1], math.atan2(d[1], d[0])])
    return np.array(pt)


def trace_entry(cfg: RunConfig, text: str):
    system = cfg.build_system()
    state = parse_entry(text, system.field.kind)
    return trace(system, state[None, :], cfg.tol, record_path=False)[0]


# ---------------------------------------------------------------- atlas, bounds

def atlas_for(cfg: RunConfig, n_points: int | None = None, n_angles: int | None = None):
    system = cfg.build_system()
    return build_atlas(system, n_points or cfg.n_points, n_angles or cfg.n_angles, cfg.tol,
                       cfg.resolution, cfg.continuity, cfg.max_failed)


def registry_for(cfg: RunConfig, path=None) -> NormRegistry:
    p = path if path is not None else cfg.norms_file
    return load_registry(p)


def bound_records(cfg: RunConfig, atlas, j: int, registry: NormRegistry) -> dict:
    ann_m = registry.get(cfg.space, j)
    ann_dm = registry.get(cfg.double_space, j)
    rhs_m = reduced_rank(ann_m, j) if ann_m is not None else None
    rhs_dm = reduced_rank(ann_dm, j) if ann_dm is not None else None
    rec = morse_bound_report(atlas, j, rhs_m, rhs_dm).to_dict()
    check_provenance(rec)
    ranks = {k: v for k, v in (("M", rhs_m), ("DM", rhs_dm)) if v is not None}
    obs = convexity_obstruction(atlas, j, ranks)
    rec["obstruction"] = {"flagged": obs.flagged, "max_codim": obs.max_codim, "j_convex": obs.j_convex}
    rec["spaces"] = {"M": cfg.space, "DM": cfg.double_space}
    return rec


def atlas_summary(atlas) -> dict:
    status: dict[str, int] = {}
    for r in atlas.records:
        status[r.status] = status.get(r.status, 0) + 1
    return {
        "kind": atlas.kind, "nodes": atlas.n_nodes, "resolution": list(atlas.resolution),
        "failed_fraction": atlas.failed_fraction, "status_counts": status,
        "counts": [{"pattern": r.pattern, "codim": r.codim, "components": r.components,
                    "nodes": r.nodes} for r in atlas.counts()],
        "tangent_entries": int(np.sum(atlas.tangent_entry)),
    }


# ---------------------------------------------------------------- mho from a config

def grid_mho(cfg: RunConfig, variant: str):
    atlas = atlas_for(cfg, cfg.grid_points, cfg.grid_angles)
    X = atlas_complex(atlas, name=f"{cfg.name}-grid")
    return build_mho(X, variant, heuristic=True)


def mho_records(mho, out_dir: Path, meta: dict, stem: str, notices: list[str]) -> dict:
    doc = mho.to_json()
    doc["quotients"] = []
    for j in sorted(mho.groups):
        Q = mho.quotient(j)
        q = Q.to_json()
        q["codim"] = j
        if q.get("ball_notice"):
            notices.append(f"codim {j}: {q['ball_notice']}")
        elif Q.quotient_dim:
            try:
                verts = Q.ball_polytope()
                emit_polytope(out_dir, f"{stem}_ball_codim{j}", verts, meta, notices)
            except DimensionCapExceeded as e:
                notices.append(str(e))
        doc["quotients"].append(q)
    return doc


# ---------------------------------------------------------------- scattering

def scatter_run(cfg: RunConfig, out_dir: Path, meta: dict, check_reversal: bool = False) -> dict:
    system = cfg.build_system()
    if system.field.kind != "geodesic":
        raise ValueError("scatter runs sample geodesic entries; use stratify for explicit fields")
    E = geodesic_entries(system.domain, cfg.n_points, cfg.n_angles, cfg.resolution)
    res = scattering_map(system, E, cfg.tol)
    write_cache(out_dir / "trajectories.trvk", res.records)
    write_jsonl(out_dir / "trajectories.jsonl", res.records)
    rows = [{"entry": s.entry, "exit": s.exit, "flight_time": s.flight_time, "pattern": s.pattern}
            for s in res.samples]
    doc = {"n_entries": len(E), "n_samples": len(res.samples), "trapped": len(res.trapped),
           "failed": len(res.failed), "samples": rows}
    if check_reversal:
        ones = [s for s in res.samples if s.pattern == "11"]
        err = reversal_errors(system, ones, cfg.tol)
        doc["reversal"] = {"checked": len(ones), "max_error": float(np.max(err)) if len(err) else 0.0}
    write_atomic(out_dir / "scatter.json", dumps_json(doc, meta))
    return doc


# ---------------------------------------------------------------- full report

def full_report(cfg: RunConfig, out_dir: Path | None = None, registry: NormRegistry | None = None) -> dict:
    """Stratify, count, bound, sketch.  Returns {artifact name: path}."""
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = cfg.meta()
    reg = registry or registry_for(cfg)
    atlas = atlas_for(cfg)
    files = {}
    files["counts"] = write_atomic(out / "counts.csv", counts_csv(atlas.counts(), meta))
    files["atlas"] = write_atomic(out / "atlas.json", dumps_json(atlas_summary(atlas), meta))
    files["entry_chart"] = write_atomic(out / "entry_chart.svg",
                                        entry_chart_svg(atlas, meta, f"{cfg.name}: patterns over the entry chart"))
    max_codim = max((r.codim for r in atlas.counts()), default=0)
    bounds, missing = [], []
    for j in range(0, max_codim + 2):
        try:
            bounds.append(bound_records(cfg, atlas, j, reg))
        except MissingAnnotation as e:
            missing.append({"j": j, "reason": str(e)})
    convex = []
    for k in range(1, max_codim + 2):
        c = check_k_convexity(atlas, k)
        convex.append({"k": k, "convex": c.convex, "witnesses": [w[0] for w in c.witnesses]})
    files["bounds"] = write_atomic(out / "bounds.json", dumps_json(
        {"bounds": bounds, "missing": missing, "convexity": convex}, meta))
    notices: list[str] = []
    mho_doc = {}
    for variant in ("double", "interior"):
        try:
            m = grid_mho(cfg, variant)
            mho_doc[variant] = mho_records(m, out, meta, f"mho_{variant}", notices)
        except StratificationDefect as e:
            mho_doc[variant] = {"heuristic": True, "defect": str(e)}
        except ValueError as e:
            mho_doc[variant] = {"heuristic": True, "skipped": str(e)}
    mho_doc["notices"] = notices
    files["mho"] = write_atomic(out / "mho.json", dumps_json(mho_doc, meta))
    index = {k: Path(v).name for k, v in sorted(files.items())}
    files["index"] = write_atomic(out / "report.json", dumps_json(
        {"files": index, "patterns": [r.pattern for r in atlas.counts()],
         "max_codim": max_codim}, meta))
    return files


__all__ = ["Tolerances", "atlas_for", "bound_records", "full_report", "grid_mho", "parse_entry",
           "scatter_run", "trace_entry"]
