"""Command-line entry point.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure
(ill-conditioned or trapped trajectories beyond the allowed fraction),
4 invariant violation (stratification defect, parity failure).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, load_config
from .expr import ExpressionError
from .flow import BudgetExceeded, DegenerateMetric, DomainError
from .homology import ComplexError, StratifiedCellComplex
from .homology.models import load_model
from .local_models import IllConditioned, ModelPolynomial, trajectories_at
from .mho import StratificationDefect, build_mho, localized_pd
from .norms import RegistryConflict, UnknownAnnotation
from .omega import InadmissiblePattern, enumerate_patterns, format_pattern, hasse_diagram, parse_pattern
from .reports import UnprovenancedValue, counts_csv, dumps_json, entry_chart_svg, write_atomic
from .stratification import AtlasHoles, MissingAnnotation, refinement_stability

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INVARIANT = 0, 2, 3, 4

log = logging.getLogger("travgen")


class ParityFailure(RuntimeError):
    pass


def _out_dir(args, cfg=None) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return cfg.out_dir if cfg is not None else Path("out")


def _emit(doc) -> None:
    sys.stdout.write(dumps_json(doc))


def _config(args):
    cfg = load_config(args.config)
    if getattr(args, "n_points", None):
        cfg.n_points = args.n_points
    if getattr(args, "n_angles", None):
        cfg.n_angles = args.n_angles
    return cfg


# ---------------------------------------------------------------- subcommands

def cmd_omega_enum(args) -> int:
    pats = enumerate_patterns(args.max_reduced_norm)
    if args.format == "json":
        _emit([{"pattern": format_pattern(p), "entries": list(p.entries), "norm": p.norm,
                "reduced_norm": p.reduced_norm} for p in pats])
    elif args.format == "dot":
        sys.stdout.write(hasse_diagram(args.max_reduced_norm).to_dot() + "\n")
    else:
        for p in pats:
            print(format_pattern(p))
    return EXIT_OK


def _parse_deformation(text: str | None) -> dict:
    out = {}
    if not text:
        return out
    for item in text.split(";"):
        if not item.strip():
            continue
        key, val = item.split("=")
        i, l = (int(t) for t in key.split(","))
        out[(i, l)] = float(val)
    return out


def cmd_model_classify(args) -> int:
    try:
        model = ModelPolynomial.from_pattern(parse_pattern(args.pattern), _parse_deformation(args.deform))
    except (KeyError, ValueError) as e:
        raise ConfigError(str(e)) from None
    div = trajectories_at(model, args.tol)
    _emit({"model": json.loads(model.to_json()), "expression": model.expression(),
           "trajectories": json.loads(div.to_json()),
           "patterns": [format_pattern(p) for p in div.patterns]})
    return EXIT_OK


def cmd_flow_trace(args) -> int:
    from .pipeline import trace_entry
    cfg = _config(args)
    try:
        rec = trace_entry(cfg, args.entry)
    except ValueError as e:
        if isinstance(e, (DomainError, DegenerateMetric, ExpressionError)):
            raise
        raise ConfigError(str(e)) from None
    doc = {"entry": rec.entry_state, "start": rec.start_state, "status": rec.status,
           "message": rec.message,
           "events": [{"time": e.time, "state": e.state, "multiplicity": e.multiplicity,
                       "sign": e.sign} for e in rec.events],
           "pattern": None if rec.pattern is None else str(rec.pattern)}
    if args.json:
        _emit({"meta": cfg.meta(), "record": doc})
    else:
        print(doc["pattern"] if doc["pattern"] is not None else f"{rec.status}: {rec.message}")
    if rec.status == "parity":
        raise ParityFailure(rec.message)
    if rec.status in ("budget", "ill-conditioned"):
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_scatter(args) -> int:
    from .pipeline import scatter_run
    cfg = _config(args)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    doc = scatter_run(cfg, out, cfg.meta(), args.check_reversal)
    summary = {k: v for k, v in doc.items() if k != "samples"}
    _emit(summary)
    bad = (doc["trapped"] + doc["failed"]) / max(1, doc["n_entries"])
    return EXIT_NUMERIC if bad > cfg.max_failed else EXIT_OK


def cmd_stratify(args) -> int:
    from .pipeline import atlas_for, atlas_summary
    cfg = _config(args)
    out = _out_dir(args, cfg)
    meta = cfg.meta()
    atlas = atlas_for(cfg)
    summary = atlas_summary(atlas)
    if args.refine:
        stable, _, fine = refinement_stability(cfg.build_system(), cfg.n_points, cfg.n_angles, cfg.tol,
                                               resolution=cfg.resolution, continuity=cfg.continuity,
                                               max_failed=cfg.max_failed)
        summary["refinement"] = {"stable": stable, "fine_counts": fine.count_map()}
    write_atomic(out / "counts.csv", counts_csv(atlas.counts(), meta))
    write_atomic(out / "atlas.json", dumps_json(summary, meta))
    write_atomic(out / "entry_chart.svg", entry_chart_svg(atlas, meta, cfg.name))
    _emit({"counts": summary["counts"], "out": out.as_posix()})
    return EXIT_OK


def cmd_mho_build(args) -> int:
    from .pipeline import grid_mho, mho_records
    notices: list[str] = []
    if args.model:
        try:
            X = load_model(args.model)
        except KeyError as e:
            raise ConfigError(str(e.args[0])) from None
        meta = {"tool": "travgen", "version": __version__, "config_hash": "model:" + args.model, "seed": 0}
        mho = build_mho(X, args.variant)
        out = _out_dir(args)
    elif args.complex:
        X = StratifiedCellComplex.load(args.complex)
        meta = {"tool": "travgen", "version": __version__, "config_hash": "file:" + Path(args.complex).name,
                "seed": 0}
        mho = build_mho(X, args.variant)
        out = _out_dir(args)
    else:
        cfg = _config(args)
        meta = cfg.meta()
        mho = grid_mho(cfg, args.variant)
        out = _out_dir(args, cfg)
    doc = mho_records(mho, out, meta, f"mho_{args.variant}", notices)
    if args.duality:
        doc["localized_duality"] = []
        for j in range(mho.dim + 1):
            doc["localized_duality"].append(localized_pd(mho, j).to_json())
    doc["notices"] = notices
    write_atomic(out / f"mho_{args.variant}.json", dumps_json(doc, meta))
    _emit({"groups": doc["groups"], "differentials": doc["differentials"], "heuristic": doc["heuristic"],
           "notices": notices})
    return EXIT_OK


def cmd_verify_bounds(args) -> int:
    from .pipeline import atlas_for, bound_records, registry_for
    cfg = _config(args)
    reg = registry_for(cfg, args.norms)
    atlas = atlas_for(cfg)
    rec = bound_records(cfg, atlas, args.j, reg)
    _emit({"meta": cfg.meta(), "record": rec})
    return EXIT_OK


def cmd_report(args) -> int:
    from .pipeline import full_report, registry_for
    cfg = _config(args)
    files = full_report(cfg, _out_dir(args, cfg), registry_for(cfg, args.norms))
    _emit({k: Path(v).as_posix() for k, v in sorted(files.items())})
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="travgen", description="Tangency patterns of traversing flows.")
    p.add_argument("--version", action="version", version=f"travgen {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp, required=True):
        sp.add_argument("--config", required=required, help="run configuration (.cfg)")
        sp.add_argument("--out", help="output directory (overrides [output] dir)")
        sp.add_argument("--n-points", type=int, help="override [mesh] n_points")
        sp.add_argument("--n-angles", type=int, help="override [mesh] n_angles")

    s = sub.add_parser("omega-enum", help="list admissible patterns up to a reduced norm")
    s.add_argument("--max-reduced-norm", type=int, required=True)
    s.add_argument("--format", choices=["text", "json", "dot"], default="text")
    s.set_defaults(func=cmd_omega_enum)

    s = sub.add_parser("model-classify", help="trajectories of a deformed local model")
    s.add_argument("--pattern", required=True, help="e.g. 121 or (1,2,1)")
    s.add_argument("--deform", help="deformation 'i,l=value;...'")
    s.add_argument("--tol", type=float)
    s.set_defaults(func=cmd_model_classify)

    s = sub.add_parser("flow-trace", help="trace one trajectory")
    with_config(s)
    s.add_argument("--entry", required=True, help="'(x,y) dir (dx,dy)'")
    s.add_argument("--json", action="store_true", help="print the full record")
    s.set_defaults(func=cmd_flow_trace)

    s = sub.add_parser("scatter", help="scattering map on a boundary mesh")
    with_config(s)
    s.add_argument("--check-reversal", action="store_true")
    s.set_defaults(func=cmd_scatter)

    s = sub.add_parser("stratify", help="pattern atlas, component counts, entry-chart figure")
    with_config(s)
    s.add_argument("--refine", action="store_true", help="also compare against a doubled mesh")
    s.set_defaults(func=cmd_stratify)

    s = sub.add_parser("mho-build", help="build the differential complexes of a stratified model")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="shipped synthetic model name")
    src.add_argument("--complex", help="complex JSON file")
    src.add_argument("--config", help="run configuration; uses a coarse grid model (heuristic)")
    s.add_argument("--out")
    s.add_argument("--n-points", type=int)
    s.add_argument("--n-angles", type=int)
    s.add_argument("--variant", choices=["double", "interior"], default="double")
    s.add_argument("--duality", action="store_true", help="also compute localized duality operators")
    s.set_defaults(func=cmd_mho_build)

    s = sub.add_parser("verify-bounds", help="component-count bounds against annotated ranks")
    with_config(s)
    s.add_argument("--j", type=int, required=True)
    s.add_argument("--norms", help="annotations file (default: [norms] file or shipped defaults)")
    s.set_defaults(func=cmd_verify_bounds)

    s = sub.add_parser("report", help="full pipeline: counts, bounds, figures, complexes")
    with_config(s)
    s.add_argument("--norms")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ExpressionError, DomainError, DegenerateMetric, ComplexError,
            MissingAnnotation, UnknownAnnotation, RegistryConflict, UnprovenancedValue,
            InadmissiblePattern, FileNotFoundError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (IllConditioned, BudgetExceeded, AtlasHoles) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (StratificationDefect, ParityFailure) as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
