"""
Command-line front end.

    mzinet optimize|simulate|sweep|study|export-geometry|plot --spec FILE --out DIR
           [--seed N] [--max-iter N]

Each command writes its artifacts into ``--out`` together with a
``manifest-<command>.json`` holding the spec hash, seed and SHA-256 of every
artifact. Failures exit non-zero with a JSON error object on stderr.
"""

import argparse
from dataclasses import replace
import hashlib
import json
import math
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .designspec import parse_design_spec
from .errors import SpecError
from .mesh import (geometry_document, read_geometry, read_spectrum_csv, simulate_spectrum,
                   write_geometry, write_spectrum_csv)
from .optimize import OptimizationError, run_optimization
from .svgplot import spectrum_chart, trace_chart
from .tolerance import DEFAULT_OFFSETS, etch_sweep, layer_study, min_over_seeds, write_study_csv

COMMANDS = ("optimize", "simulate", "sweep", "study", "export-geometry", "plot")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _trace_checksum(path):
    # wall-clock timings differ between otherwise identical runs
    h = hashlib.sha256()
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            rec.pop("wall_ms", None)
            h.update((json.dumps(rec, sort_keys=True) + "\n").encode())
    return h.hexdigest()


def write_manifest(out, command, spec, seed, artifacts, extra=None):
    out = Path(out)
    sums = {}
    for p in sorted(artifacts, key=str):
        rel = Path(p).relative_to(out).as_posix()
        sums[rel] = _trace_checksum(p) if rel.endswith("trace.jsonl") else _sha256(p)
    doc = {
        "command": command,
        "version": __version__,
        "spec_hash": spec.spec_hash(),
        "seed": seed,
        "artifacts": sums,
        "notes": "trace.jsonl checksum excludes wall_ms",
    }
    if extra:
        doc.update(extra)
    path = out / f"manifest-{command}.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _float_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser():
    parser = argparse.ArgumentParser(prog="mzinet", description="MZI-mesh photonic device designer")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--spec", required=True, help="design spec (YAML)")
        p.add_argument("--out", help="output directory (default: output_dir from the spec)")
        p.add_argument("--seed", type=int, help="override the spec seed")
        p.add_argument("--max-iter", type=int, help="override the iteration cap")
        if name in ("simulate", "sweep"):
            p.add_argument("--geometry", help="geometry JSON (default: OUT/geometry.json)")
        if name in ("sweep", "study"):
            p.add_argument("--offsets", type=_float_list, default=list(DEFAULT_OFFSETS),
                           help="comma-separated etch offsets in nm")
        if name == "study":
            p.add_argument("--layers", type=_int_list, default=[2, 3, 4, 6],
                           help="comma-separated layer counts")
            p.add_argument("--seeds-per-count", type=int, default=3)
    return parser


def _cmd_optimize(args, spec, out, seed):
    device, trace = run_optimization(spec, max_iterations=args.max_iter, seed=seed)
    obj = spec.objective()
    spectrum = simulate_spectrum(device, obj.wavelengths_nm, obj.input_port)
    files = [out / "trace.jsonl", out / "geometry.json", out / "spectrum.csv"]
    trace.write_jsonl(files[0])
    write_geometry(files[1], device)
    write_spectrum_csv(files[2], obj.wavelengths_nm, spectrum)
    ckdir = out / "checkpoints"
    ckdir.mkdir(exist_ok=True)
    for it, params in sorted(trace.checkpoints.items()):
        p = ckdir / f"iter_{it:05d}.json"
        doc = geometry_document(device.with_params(params))
        doc.update(iteration=it, J=trace.values[it])
        p.write_text(json.dumps(doc, indent=2) + "\n")
        files.append(p)
    summary = {
        "iterations": len(trace),
        "stop_reason": trace.stop_reason,
        "best_iteration": trace.best_iteration,
        "J_initial": trace.values[0],
        "J_final": trace.best_value,
    }
    return files, summary


def _geometry_path(args, out):
    return Path(args.geometry) if args.geometry else out / "geometry.json"


def _cmd_simulate(args, spec, out, seed):
    device = read_geometry(_geometry_path(args, out))
    obj = spec.objective()
    spectrum = simulate_spectrum(device, obj.wavelengths_nm, obj.input_port)
    path = out / "simulated_spectrum.csv"
    write_spectrum_csv(path, obj.wavelengths_nm, spectrum)
    return [path], {}


def _cmd_sweep(args, spec, out, seed):
    device = read_geometry(_geometry_path(args, out))
    report = etch_sweep(device, spec.objective(), args.offsets)
    path = out / "tolerance.csv"
    report.write_csv(path)
    files = [path] + report.write_spectra(out / "tolerance_spectra")
    return files, {"J": dict(zip(map(str, report.offsets), report.values))}


def _cmd_study(args, spec, out, seed):
    rows = layer_study(replace(spec, seed=seed), args.layers, args.seeds_per_count,
                       args.offsets, max_iterations=args.max_iter)
    path = out / "study.csv"
    write_study_csv(path, rows, args.offsets)
    best = {str(k): v for k, v in min_over_seeds(rows).items()}
    failed = sum(1 for r in rows if r.error)
    return [path], {"min_J_by_layers": best, "failed_runs": failed}


def _cmd_export(args, spec, out, seed):
    device = spec.initial_device(seed=seed)
    obj = spec.objective()
    geo, spec_csv = out / "initial_geometry.json", out / "initial_spectrum.csv"
    write_geometry(geo, device)
    write_spectrum_csv(spec_csv, obj.wavelengths_nm,
                       simulate_spectrum(device, obj.wavelengths_nm, obj.input_port))
    return [geo, spec_csv], {}


def _cmd_plot(args, spec, out, seed):
    files = []
    obj = spec.objective()
    spectrum_csv = out / "spectrum.csv"
    if not spectrum_csv.exists():
        raise FileNotFoundError(f"{spectrum_csv} not found; run optimize first")
    lam, spectrum = read_spectrum_csv(spectrum_csv)
    p = out / "spectrum.svg"
    p.write_text(spectrum_chart(lam, spectrum, obj.targets, title=f"{spec.kind} transmission"))
    files.append(p)
    trace_path = out / "trace.jsonl"
    if trace_path.exists():
        with open(trace_path) as fh:
            values = [json.loads(line)["J"] for line in fh if line.strip()]
        p = out / "trace.svg"
        p.write_text(trace_chart(values, title="objective vs iteration"))
        files.append(p)
    return files, {}


HANDLERS = {
    "optimize": _cmd_optimize,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "study": _cmd_study,
    "export-geometry": _cmd_export,
    "plot": _cmd_plot,
}


def _error_object(exc, command):
    err = {"error": type(exc).__name__, "message": str(exc), "command": command}
    if isinstance(exc, SpecError):
        err["problems"] = list(exc.problems)
    if isinstance(exc, OptimizationError):
        err["iteration"] = exc.iteration
        err["cause"] = f"{type(exc.cause).__name__}: {exc.cause}"
    if hasattr(exc, "indices"):
        err["iteration"] = getattr(exc, "iteration", None)
        err["indices"] = [int(i) for i in np.asarray(exc.indices).reshape(-1)]
    return err


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    return obj


def run(command, args):
    """Execute one command; returns (manifest path, summary dict)."""
    spec = parse_design_spec(args.spec)
    seed = spec.seed if args.seed is None else args.seed
    if args.max_iter is not None and args.max_iter < 1:
        raise ValueError("--max-iter must be >= 1")
    out = Path(args.out or spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files, summary = HANDLERS[command](args, spec, out, seed)
    manifest = write_manifest(out, command, spec, seed, files,
                              {"max_iterations": args.max_iter or spec.max_iterations})
    return manifest, summary


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        manifest, summary = run(args.command, args)
    except KeyboardInterrupt:
        sys.stderr.write(json.dumps({"error": "KeyboardInterrupt", "command": args.command}) + "\n")
        return 130
    except Exception as exc:
        sys.stderr.write(json.dumps(_error_object(exc, args.command)) + "\n")
        return 2 if isinstance(exc, SpecError) else 1
    print(json.dumps(_jsonable({"command": args.command, "manifest": str(manifest), **summary})))
    return 0


if __name__ == "__main__":
    sys.exit(main())
