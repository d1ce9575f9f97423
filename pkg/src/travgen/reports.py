"""Deterministic CSV / JSON / SVG emission.

Every file is written atomically (temp file + rename).  JSON uses sorted
keys and fixed float formatting; SVG output pins matplotlib's hash salt
and drops the creation date, so identical inputs give identical bytes.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from fractions import Fraction
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .omega import as_pattern  # noqa: E402

COUNT_HEADER = ["pattern", "codim", "components", "nodes", "config_hash", "version"]


class UnprovenancedValue(ValueError):
    pass


def write_atomic(path, data: bytes | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _plain(obj):
    if isinstance(obj, Fraction):
        return str(obj) if obj.denominator != 1 else int(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(f"{float(obj):.12g}")
    if isinstance(obj, np.ndarray):
        return [_plain(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(x) for x in obj]
    if isinstance(obj, Path):
        return obj.as_posix()
    return obj


def dumps_json(obj, meta: dict | None = None) -> str:
    doc = {"meta": meta, "data": obj} if meta is not None else obj
    return json.dumps(_plain(doc), sort_keys=True, indent=1) + "\n"


def counts_csv(rows, meta: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COUNT_HEADER)
    for r in rows:
        w.writerow([r.pattern, r.codim, r.components, r.nodes, meta["config_hash"], meta["version"]])
    return buf.getvalue()


def check_provenance(record: dict) -> None:
    """Refuse to emit a bound record whose right-hand sides lack provenance."""
    for key in ("rhs_m", "rhs_dm"):
        v = record.get(key)
        if v is not None and not str(v.get("provenance", "")).strip():
            raise UnprovenancedValue(f"{key} carries no provenance")


# ---------------------------------------------------------------- figures

def _svg_bytes(fig, meta: dict) -> bytes:
    buf = io.BytesIO()
    with matplotlib.rc_context({"svg.hashsalt": "travgen", "svg.fonttype": "path"}):
        fig.savefig(buf, format="svg", metadata={
            "Date": None, "Creator": f"travgen {meta['version']}",
            "Description": f"config {meta['config_hash']} seed {meta['seed']}"})
    plt.close(fig)
    return buf.getvalue()


def entry_chart_svg(atlas, meta: dict, title: str = "") -> bytes:
    """Heatmap of patterns over the (arc position, entry angle) chart, one panel per curve."""
    pats = sorted({p for p in atlas.patterns if p is not None}, key=lambda s: as_pattern(s).sort_key())
    code = {p: i for i, p in enumerate(pats)}
    curves = sorted(set(atlas.chart[:, 0].astype(int).tolist()))
    fig, axes = plt.subplots(1, max(1, len(curves)), figsize=(4.2 * max(1, len(curves)), 3.4),
                             squeeze=False)
    cmap = plt.get_cmap("tab10", max(1, len(pats)))
    for ax, ci in zip(axes[0], curves):
        sel = atlas.chart[:, 0].astype(int) == ci
        vals = np.array([code.get(p, -1) if p is not None else -1
                         for p, s in zip(atlas.patterns, sel) if s], dtype=float)
        if atlas.resolution and len(atlas.resolution) == 2:
            grid = vals.reshape(-1, atlas.resolution[1]).T
            grid = np.ma.masked_less(grid, 0)
            ax.imshow(grid, origin="lower", aspect="auto", cmap=cmap, vmin=-0.5,
                      vmax=max(0, len(pats) - 1) + 0.5, extent=(0, 1, -90, 90),
                      interpolation="nearest")
            ax.set_ylabel("entry angle from inward normal (deg)")
        else:
            arc = atlas.chart[sel, 1]
            ax.scatter(arc, np.zeros_like(arc), c=vals, cmap=cmap, vmin=-0.5,
                       vmax=max(0, len(pats) - 1) + 0.5, s=8)
            ax.set_yticks([])
        ax.set_xlabel("arc position")
        ax.set_title(f"boundary curve {ci}")
    handles = [plt.Line2D([], [], marker="s", linestyle="", color=cmap(code[p]), label=f"({p})")
               for p in pats]
    if handles:
        fig.legend(handles=handles, loc="upper right", fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _svg_bytes(fig, meta)


def polytope_svg(vertices, meta: dict, title: str = "") -> bytes | None:
    """Sketch of a unit ball given by its vertices; None when the rank exceeds 3."""
    V = np.array([[float(x) for x in v] for v in vertices], dtype=float)
    dim = V.shape[1] if V.size else 0
    if dim > 3:
        return None
    if dim == 3:
        from scipy.spatial import ConvexHull
        fig = plt.figure(figsize=(4, 4))
        ax = fig.add_subplot(projection="3d")
        hull = ConvexHull(V)
        for simplex in hull.simplices:
            loop = np.append(simplex, simplex[0])
            ax.plot(V[loop, 0], V[loop, 1], V[loop, 2], color="0.3", linewidth=0.8)
        ax.scatter(V[:, 0], V[:, 1], V[:, 2], color="C3")
    else:
        fig, ax = plt.subplots(figsize=(4, 4))
        if dim == 2 and len(V) >= 3:
            ang = np.arctan2(V[:, 1], V[:, 0])
            P = V[np.argsort(ang)]
            P = np.vstack([P, P[:1]])
            ax.fill(P[:, 0], P[:, 1], alpha=0.25, color="C0")
            ax.plot(P[:, 0], P[:, 1], color="C0")
            ax.scatter(V[:, 0], V[:, 1], color="C3", zorder=3)
        elif dim == 2:
            ax.plot(V[:, 0], V[:, 1], color="C0")
        elif dim == 1:
            ax.plot([V.min(), V.max()], [0, 0], color="C0")
            ax.scatter(V[:, 0], np.zeros(len(V)), color="C3")
            ax.set_yticks([])
        ax.set_aspect("equal", adjustable="datalim")
        ax.axhline(0, color="0.8", linewidth=0.5)
        ax.axvline(0, color="0.8", linewidth=0.5)
    if title:
        ax.set_title(title)
    return _svg_bytes(fig, meta)


def emit_polytope(out_dir, stem: str, vertices, meta: dict, notices: list[str]) -> Path | None:
    svg = polytope_svg(vertices, meta, stem)
    if svg is None:
        notices.append(f"{stem}: ball has rank > 3; SVG skipped, vertices are in the JSON record")
        return None
    return write_atomic(Path(out_dir) / f"{stem}.svg", svg)
