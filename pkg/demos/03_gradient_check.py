"""Reverse-mode gradient against long-double central differences."""

import numpy as np

from mzinet import DesignObjective, DeviceState, InitConfig, build_topology, gradient
from mzinet import finite_difference_check, initialize_parameters

topo = build_topology(2, 2)
device = DeviceState(topo, initialize_parameters(topo, InitConfig(seed=3)))
lam = np.linspace(1400, 1600, 8)
objective = DesignObjective(lam, np.full((8, 2), 0.5))

report = gradient(device, objective)
print(f"J = {report.value:.6e}, |grad| = {np.linalg.norm(report.gradient):.3e}")
print(f"worst relative error vs finite differences: {finite_difference_check(device, objective):.2e}")
