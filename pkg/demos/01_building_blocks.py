"""Waveguide surrogates: effective index, taper phase and the 50% coupler."""

import numpy as np

from mzinet import TaperProfile, coupler_response, effective_index, taper_phase

lam = np.linspace(1.40, 1.60, 5)

print("n_eff of a 450 nm strip")
for l, n in zip(lam, effective_index(0.45, lam)):
    print(f"  {l * 1e3:.0f} nm  {n:.5f}")

# two tapers of equal length, one bulged: the phase difference is what an MZI arm tunes
flat = TaperProfile([0.45] * 5, 8.0)
bulge = TaperProfile([0.46, 0.48, 0.50, 0.48, 0.46], 8.0)
print("\ntaper phase difference (rad)")
for l in lam:
    print(f"  {l * 1e3:.0f} nm  {taper_phase(bulge, l) - taper_phase(flat, l):+.4f}")

print("\ncoupler power split |t|^2, |q|^2")
dc = coupler_response(lam)
for l, t, q in zip(lam, dc.t, dc.q):
    print(f"  {l * 1e3:.0f} nm  {t * t:.4f}  {q * q:.4f}")
