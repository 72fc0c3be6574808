"""Etch-offset sweep of an optimized splitter."""

from importlib import resources

from mzinet import etch_sweep, parse_design_spec, run_optimization

spec = parse_design_spec(resources.files("mzinet") / "data" / "splitter_50_50.yaml")
device, _ = run_optimization(spec)
report = etch_sweep(device, spec.objective())
for offset, J in zip(report.offsets, report.values):
    print(f"  dw {offset:+5.0f} nm  J {J:.3e}  ({J / report.reference_value:.2f} x nominal)")
