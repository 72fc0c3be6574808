"""Optimize the shipped 50/50 splitter and print its band."""

from importlib import resources

import numpy as np

from mzinet import parse_design_spec, run_optimization, simulate_spectrum

spec = parse_design_spec(resources.files("mzinet") / "data" / "splitter_50_50.yaml")
device, trace = run_optimization(spec, callback=lambda it, J: it % 50 == 0 and print(f"  iter {it:4d}  J {J:.3e}"))
print(f"{trace.stop_reason} after {len(trace)} iterations, best J {trace.best_value:.3e}")

lam = spec.wavelengths_nm()
T = simulate_spectrum(device, lam, spec.input_index())
for l, row in list(zip(lam, T))[::5]:
    print(f"  {l:.1f} nm  " + "  ".join(f"{v:.3f}" for v in row))
print("worst deviation from 0.5:", float(np.max(np.abs(T - 0.5))))
