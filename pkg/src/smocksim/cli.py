"""Command-line front end: validate, preview and compare.

Exit codes
    0   success
    2   input/output error (missing or unreadable pattern, unwritable output)
    3   malformed JSON or schema violation
    4   pattern semantically invalid
    5   2D simulation failed
    6   lifting to 3D failed
    7   3D deformation failed
    8   compare: at least one solver failed (report still written)
    64  command-line usage error

Diagnostics are JSON objects on stderr; stdout only carries artifact paths
and ``key=value`` summary lines.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import baseline_opt, deform3d, lift3d, sim2d
from .errors import Infeasible, MaxIterationsExceeded, SchemaError, SmockError, ValidationError
from .pattern import BUNDLED, Style, bundled_pattern_path, extract_springs, parse_pattern

log = logging.getLogger("smocksim")

EXIT_OK = 0
EXIT_IO = 2
EXIT_SCHEMA = 3
EXIT_VALIDATION = 4
EXIT_SIM2D = 5
EXIT_LIFT3D = 6
EXIT_DEFORM3D = 7
EXIT_COMPARE = 8
EXIT_USAGE = 64

_STAGE_EXIT = {"sim2d": EXIT_SIM2D, "lift3d": EXIT_LIFT3D, "deform3d": EXIT_DEFORM3D}


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default, which is reserved for I/O errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        _diag({"error": "UsageError", "message": message})
        sys.exit(EXIT_USAGE)


class _StageFailure(Exception):
    def __init__(self, stage, exc):
        super().__init__(str(exc))
        self.stage = stage
        self.exc = exc


def _diag(doc):
    sys.stderr.write(json.dumps(doc, sort_keys=True, default=str) + "\n")


def _setup_logging():
    level = os.environ.get("SMOCKSIM_LOG", "").strip().lower()
    levels = {"off": logging.CRITICAL + 1, "info": logging.INFO, "debug": logging.DEBUG}
    logger = logging.getLogger("smocksim")
    logger.setLevel(levels.get(level, logging.WARNING))
    if not logger.handlers:
        h = logging.StreamHandler(sys.stderr)
        h.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        logger.addHandler(h)
    logger.propagate = False


def _resolve(source):
    """``bundled:NAME`` or a filesystem path."""
    if source.startswith("bundled:"):
        name = source.split(":", 1)[1]
        if name not in BUNDLED:
            raise FileNotFoundError(f"no bundled pattern named {name!r}; choose from {BUNDLED}")
        return name, bundled_pattern_path(name)
    return Path(source).stem, Path(source)


def _load(source):
    """Load a pattern; returns (name, path, pattern, exit_code)."""
    try:
        name, path = _resolve(source)
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        _diag({"error": "IoError", "stage": "validate", "path": source, "message": str(exc)})
        return None, None, None, EXIT_IO
    try:
        return name, str(path), parse_pattern(text), EXIT_OK
    except SchemaError as exc:
        _diag({"error": "SchemaError", "stage": "validate", "path": source, "message": str(exc),
               "location": exc.location})
        return name, str(path), None, EXIT_SCHEMA
    except ValidationError as exc:
        _diag({"error": "ValidationError", "stage": "validate", "path": source,
               "message": str(exc), "location": exc.location})
        return name, str(path), None, EXIT_VALIDATION


def _positive(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _gamma(text):
    v = _positive(text)
    if v > 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {text}")
    return v


def _pull_arg(text):
    if text == "per-spring":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected an angle in degrees or 'per-spring', got {text!r}") from None


def _pull_config(args, **kw):
    if args.pull == "per-spring":
        return sim2d.SimConfig2D(per_spring=True, **kw)
    return sim2d.SimConfig2D.from_angle(args.pull, **kw)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if hasattr(obj, "value") and not isinstance(obj, (int, float, str)):
        return obj.value
    return obj


def cmd_validate(args):
    name, path, p, code = _load(args.pattern)
    if code:
        return code
    print(f"valid={path}")
    print(f"rows={p.rows} cols={p.cols} style={p.style.value} paths={len(p.paths)} "
          f"stitches={sum(q.n_stitches for q in p.paths)}")
    return EXIT_OK


def _run_pipeline(p, args, out, name, manifest):
    outputs = manifest["outputs"]
    times = manifest["stage_times"]
    status = manifest["status"]
    canadian = p.style is Style.CANADIAN

    def emit(key, path):
        outputs[key] = str(path)

    stage = "sim2d"
    t0 = time.perf_counter()
    status[stage] = "running"
    try:
        sys_ = extract_springs(p, args.thickness)
        cfg2 = _pull_config(args, gamma=args.gamma, thickness=args.thickness)
        manifest["config"]["sim2d"] = _jsonable(asdict(cfg2))
        run = sim2d.simulate_canadian if canadian else sim2d.simulate
        X, trace = run(sys_, cfg2)
    except MaxIterationsExceeded as exc:
        if exc.trace is not None:
            exc.trace.to_csv(out / f"{name}.trace.csv")
            emit("trace", out / f"{name}.trace.csv")
        raise _StageFailure(stage, exc)
    except (SmockError, ValueError) as exc:
        raise _StageFailure(stage, exc)
    finally:
        times[stage] = time.perf_counter() - t0
    trace.to_csv(out / f"{name}.trace.csv")
    emit("trace", out / f"{name}.trace.csv")
    D0 = sim2d.thread_length(sys_.rest_positions, sys_.stitch_springs)
    ratio = sim2d.thread_length(X, sys_.stitch_springs) / D0 if D0 > 0 else 1.0
    manifest["shrinkage_ratio"] = ratio
    manifest["sim2d_iterations"] = len(trace)
    status[stage] = "ok"

    stage = "lift3d"
    t0 = time.perf_counter()
    status[stage] = "running"
    try:
        cons = lift3d.build_constraints(X, sys_, args.height_mode)
    except (SmockError, ValueError) as exc:
        raise _StageFailure(stage, exc)
    finally:
        times[stage] = time.perf_counter() - t0
    (out / f"{name}.constraints.json").write_text(cons.to_json() + "\n", encoding="utf-8")
    emit("constraints", out / f"{name}.constraints.json")
    status[stage] = "ok"

    stage = "deform3d"
    t0 = time.perf_counter()
    status[stage] = "running"
    try:
        cfg3 = deform3d.DeformConfig(subdivision=args.subdivision, w_sew=args.w_sew,
                                     w_pos=args.w_pos)
        manifest["config"]["deform3d"] = _jsonable(asdict(cfg3))
        mesh = deform3d.make_fine_mesh(p, sys_, cfg3)
        result, history = deform3d.deform(mesh, cons, cfg3)
    except (SmockError, ValueError) as exc:
        raise _StageFailure(stage, exc)
    finally:
        times[stage] = time.perf_counter() - t0
    deform3d.energies_to_csv(history, out / f"{name}.energy.csv")
    emit("energy", out / f"{name}.energy.csv")
    deform3d.export_obj(result, out / f"{name}.obj")
    emit("mesh", out / f"{name}.obj")
    manifest["deform3d_iterations"] = len(history) - 1
    manifest["dropped_anchors"] = list(mesh.dropped_anchors)
    status[stage] = "ok"

    if args.plots:
        from . import plotting

        emit("plot_convergence", plotting.plot_convergence(
            trace, out / f"{name}.convergence.png", None if canadian else args.gamma))
        emit("plot_embedding", plotting.plot_embedding(X, sys_, out / f"{name}.embedding.png"))
        emit("plot_energy", plotting.plot_energy(history, out / f"{name}.energy.png"))


def cmd_preview(args):
    name, path, p, code = _load(args.pattern)
    if code:
        return code
    if args.mode is not None:
        p = replace(p, style=Style(args.mode))
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        _diag({"error": "IoError", "stage": "export", "path": str(out), "message": str(exc)})
        return EXIT_IO
    manifest = {
        "input": path,
        "config": {"mode": p.style.value, "height_mode": lift3d.HeightMode(args.height_mode).value,
                   "seed": args.seed, "thickness": args.thickness, "gamma": args.gamma,
                   "pull": args.pull},
        "stage_times": {},
        "status": {},
        "outputs": {},
    }
    code = EXIT_OK
    t_all = time.perf_counter()
    try:
        _run_pipeline(p, args, out, name, manifest)
    except _StageFailure as fail:
        manifest["status"][fail.stage] = "failed"
        manifest["error"] = {"stage": fail.stage, "type": type(fail.exc).__name__,
                             "message": str(fail.exc)}
        _diag({"error": type(fail.exc).__name__, "stage": fail.stage, "message": str(fail.exc)})
        code = _STAGE_EXIT[fail.stage]
    except OSError as exc:
        _diag({"error": "IoError", "stage": "export", "message": str(exc)})
        manifest["error"] = {"stage": "export", "type": "IoError", "message": str(exc)}
        code = EXIT_IO
    manifest["stage_times"]["total"] = time.perf_counter() - t_all
    mpath = out / f"{name}.manifest.json"
    manifest["outputs"]["manifest"] = str(mpath)
    try:
        mpath.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        _diag({"error": "IoError", "stage": "export", "message": str(exc)})
        return EXIT_IO
    for key in sorted(manifest["outputs"]):
        print(manifest["outputs"][key])
    if "shrinkage_ratio" in manifest:
        print(f"shrinkage_ratio={manifest['shrinkage_ratio']:.6f}")
    for stage in ("sim2d", "lift3d", "deform3d"):
        if stage in manifest["stage_times"]:
            print(f"time_{stage}={manifest['stage_times'][stage]:.3f}")
    return code


def cmd_compare(args):
    name, path, p, code = _load(args.pattern)
    if code:
        return code
    out = Path(args.out_dir)
    report = {"input": path, "gamma": args.gamma, "thickness": args.thickness,
              "alg1": {}, "direct": {}}
    failed = False
    sys_ = extract_springs(p, args.thickness)
    try:
        cfg = _pull_config(args, gamma=args.gamma, thickness=args.thickness)
        t0 = time.perf_counter()
        X, trace = sim2d.simulate(sys_, cfg)
        dt = time.perf_counter() - t0
        D0 = sim2d.thread_length(sys_.rest_positions, sys_.stitch_springs)
        report["alg1"] = {
            "status": "ok",
            "time": dt,
            "iterations": len(trace),
            "shrinkage": sim2d.thread_length(X, sys_.stitch_springs) / D0 if D0 > 0 else 1.0,
            "max_violation": baseline_opt.max_violation(X, sys_, args.gamma, args.thickness),
            "within_band": baseline_opt.within_band(X, sys_, args.gamma, args.thickness),
        }
    except (SmockError, ValueError) as exc:
        failed = True
        report["alg1"] = {"status": "failed", "error": type(exc).__name__, "message": str(exc)}
        _diag({"error": type(exc).__name__, "stage": "alg1", "message": str(exc)})
    try:
        rep = baseline_opt.solve_direct(sys_, args.gamma, args.thickness, tol=args.tol,
                                        max_time=args.max_time)
        report["direct"] = {"status": "ok", "time": rep.wall_time, "objective": rep.objective,
                            "max_violation": rep.max_constraint_violation,
                            "iterations": rep.outer_iterations}
    except Infeasible as exc:
        failed = True
        rep = exc.report
        report["direct"] = {"status": "infeasible", "message": str(exc)}
        if rep is not None:
            report["direct"].update(time=rep.wall_time, objective=rep.objective,
                                    max_violation=rep.max_constraint_violation,
                                    iterations=rep.outer_iterations)
        _diag({"error": "Infeasible", "stage": "direct", "message": str(exc)})
    except SmockError as exc:
        failed = True
        report["direct"] = {"status": "failed", "error": type(exc).__name__, "message": str(exc)}
        _diag({"error": type(exc).__name__, "stage": "direct", "message": str(exc)})
    rpath = out / f"{name}.compare.json"
    try:
        out.mkdir(parents=True, exist_ok=True)
        rpath.write_text(json.dumps(report, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        _diag({"error": "IoError", "stage": "export", "message": str(exc)})
        return EXIT_IO
    print(rpath)
    for solver in ("alg1", "direct"):
        if "time" in report[solver]:
            print(f"time_{solver}={report[solver]['time']:.3f}")
    return EXIT_COMPARE if failed else EXIT_OK


def _add_sim_flags(sp):
    sp.add_argument("--gamma", type=_gamma, default=0.3, help="target shrinkage (0, 1]")
    sp.add_argument("--thickness", type=_positive, default=0.01, help="fabric thickness tau")
    sp.add_argument("--pull", type=_pull_arg, default=0.0,
                    help="pull angle in degrees, or 'per-spring'")
    sp.add_argument("--out-dir", default=".", help="directory for artifacts")


def build_parser():
    ap = _Parser(prog="smocksim", description="Preview smocked fabric from a stitching pattern.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("validate", help="check a pattern file")
    sp.add_argument("pattern", help="pattern JSON path or bundled:NAME")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("preview", help="run the full pipeline and export a mesh")
    sp.add_argument("pattern", help="pattern JSON path or bundled:NAME")
    _add_sim_flags(sp)
    sp.add_argument("--subdivision", type=int, default=6)
    sp.add_argument("--w-sew", type=float, default=0.1)
    sp.add_argument("--w-pos", type=float, default=0.01)
    sp.add_argument("--mode", choices=["italian", "canadian"], default=None,
                    help="override the pattern's style")
    sp.add_argument("--height-mode", choices=["pythagorean", "flat"], default="pythagorean")
    sp.add_argument("--seed", type=int, default=0, help="reserved; the pipeline is deterministic")
    sp.add_argument("--plots", action="store_true", help="also write PNG diagnostics")
    sp.set_defaults(func=cmd_preview)

    sp = sub.add_parser("compare", help="time the 2D simulation against the direct solver")
    sp.add_argument("pattern", help="pattern JSON path or bundled:NAME")
    _add_sim_flags(sp)
    sp.add_argument("--tol", type=float, default=1e-3,
                    help="direct-solver feasibility tolerance, relative to the grid unit")
    sp.add_argument("--max-time", type=float, default=None, help="direct-solver time budget (s)")
    sp.set_defaults(func=cmd_compare)
    return ap


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
