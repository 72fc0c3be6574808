"""Wavelength duplexer: route light below 1550 nm to output 1, above to output 2."""

from importlib import resources

import numpy as np

from mzinet import parse_design_spec, run_optimization, simulate_spectrum

spec = parse_design_spec(resources.files("mzinet") / "data" / "duplexer.yaml")
device, trace = run_optimization(spec)
print(f"J {trace.values[0]:.3e} -> {trace.best_value:.3e} ({trace.stop_reason}, {len(trace)} iterations)")

lam = spec.wavelengths_nm()
T = simulate_spectrum(device, lam, spec.input_index())
for l, (a, b) in zip(lam, T):
    print(f"  {l:.0f} nm  out1 {a:.3f}  out2 {b:.3f}  contrast {10 * np.log10(max(a, b) / min(a, b)):5.1f} dB")
