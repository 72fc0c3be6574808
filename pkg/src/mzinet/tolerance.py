"""
Fabrication tolerance: uniform etch-offset sweeps and the layer-count study.

Positive offsets mean wider waveguides (under-etch). Every width in the
device shifts, including taper ends and coupler waveguides. The regularizer
is computed from the design widths, so it stays at its zero-offset value and
the sweep isolates physical degradation.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import csv
import math
import os
from pathlib import Path

import numpy as np

from .gradient import evaluate_objective
from .mesh import simulate_spectrum, write_spectrum_csv
from .optimize import run_optimization
from .waveguide import ETCH_OFFSET_RANGE

DEFAULT_OFFSETS = (-20.0, -10.0, 0.0, 10.0, 20.0)
WORKERS_ENV = "MZINET_WORKERS"


def apply_etch_offset(device, offset_nm):
    """Copy of ``device`` simulated with every width shifted by ``offset_nm``.

    The trainable parameter vector is left as is.
    """
    offset_nm = float(offset_nm)
    lo, hi = ETCH_OFFSET_RANGE
    if not math.isfinite(offset_nm) or not lo <= offset_nm <= hi:
        raise ValueError(f"etch offset {offset_nm} nm outside [{lo}, {hi}] nm")
    return replace(device, etch_offset=offset_nm)


@dataclass
class ToleranceReport:
    offsets: tuple
    values: tuple
    spectra: tuple
    wavelengths_nm: np.ndarray = field(default=None, repr=False)

    @property
    def reference_value(self):
        return self.value_at(0.0)

    def value_at(self, offset_nm):
        for o, J in zip(self.offsets, self.values):
            if o == offset_nm:
                return J
        raise KeyError(offset_nm)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["offset_nm", "J"])
            for o, J in zip(self.offsets, self.values):
                w.writerow([repr(o), repr(J)])

    def write_spectra(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for o, spec in zip(self.offsets, self.spectra):
            p = directory / f"spectrum_dw_{offset_label(o)}.csv"
            write_spectrum_csv(p, self.wavelengths_nm, spec)
            paths.append(p)
        return paths


def offset_label(offset_nm):
    """m20, m10, 0, p10, p20 ..."""
    sign = "m" if offset_nm < 0 else "p" if offset_nm > 0 else ""
    return f"{sign}{abs(offset_nm):g}"


def _sweep_point(device, objective, offset):
    shifted = apply_etch_offset(device, offset)
    J = evaluate_objective(shifted, objective)
    spec = simulate_spectrum(shifted, objective.wavelengths_nm, objective.input_port)
    return J, spec


def etch_sweep(device, objective, offsets=DEFAULT_OFFSETS):
    """Objective and spectrum of ``device`` at each etch offset, in the given order."""
    offsets = tuple(float(o) for o in offsets)
    if 0.0 not in offsets:
        raise ValueError("offsets must include 0")
    for o in offsets:
        apply_etch_offset(device, o)  # validate everything before simulating
    results = [_sweep_point(device, objective, o) for o in offsets]
    return ToleranceReport(offsets, tuple(r[0] for r in results),
                           tuple(r[1] for r in results), objective.wavelengths_nm)


@dataclass
class StudyRow:
    layers: int
    seed: int
    final_value: float
    offset_values: dict
    iterations: int = 0
    stop_reason: str = ""
    error: str = ""


def _study_run(spec, layers, seed, offsets, max_iterations):
    try:
        run_spec = replace(spec, layers=layers, seed=seed)
        device, trace = run_optimization(run_spec, max_iterations=max_iterations, seed=seed)
        report = etch_sweep(device, run_spec.objective(), offsets)
        return StudyRow(layers, seed, trace.best_value, dict(zip(report.offsets, report.values)),
                        len(trace), trace.stop_reason)
    except Exception as exc:
        nan = {float(o): math.nan for o in offsets}
        return StudyRow(layers, seed, math.nan, nan, error=f"{type(exc).__name__}: {exc}")


def worker_count():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def layer_study(spec, layer_counts, seeds_per_count=3, offsets=DEFAULT_OFFSETS,
                max_iterations=None, workers=None):
    """Optimize ``seeds_per_count`` random starts for every entry of ``layer_counts``.

    Run ``r`` (counting across the whole study) uses seed ``spec.seed + r``, so
    repeated layer counts still get distinct seeds. A failed run is kept as a
    row with NaN values and its error message.
    """
    layer_counts = list(layer_counts)
    if not layer_counts:
        raise ValueError("layer_counts must not be empty")
    if seeds_per_count < 1:
        raise ValueError("seeds_per_count must be >= 1")
    offsets = tuple(float(o) for o in offsets)
    jobs = []
    for M in layer_counts:
        for _ in range(seeds_per_count):
            jobs.append((spec, int(M), spec.seed + len(jobs), offsets, max_iterations))
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_study_run, *zip(*jobs)))
    return [_study_run(*job) for job in jobs]


def study_header(offsets=DEFAULT_OFFSETS):
    return ["M", "seed", "J_final"] + [f"J_{offset_label(o)}" for o in offsets]


def write_study_csv(path, rows, offsets=DEFAULT_OFFSETS):
    offsets = tuple(float(o) for o in offsets)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(study_header(offsets) + ["iterations", "stop_reason", "error"])
        for r in rows:
            w.writerow([r.layers, r.seed, repr(r.final_value)]
                       + [repr(r.offset_values[o]) for o in offsets]
                       + [r.iterations, r.stop_reason, r.error])


def min_over_seeds(rows):
    """{M: lowest final J} ignoring failed runs."""
    out = {}
    for r in rows:
        if math.isnan(r.final_value):
            continue
        out[r.layers] = min(out.get(r.layers, math.inf), r.final_value)
    return out
