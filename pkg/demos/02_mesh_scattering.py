"""Scattering matrix of a random 4-port, 3-layer mesh and its power budget."""

import numpy as np

from mzinet import DeviceState, InitConfig, build_topology, initialize_parameters, network_scatter
from mzinet import trainable_parameter_count

topo = build_topology(4, 3)
print("MZIs per layer:", [len(p) for p in topo.layers])
print("trainable parameters:", trainable_parameter_count(4, 3, 5))

device = DeviceState(topo, initialize_parameters(topo, InitConfig(seed=1)))
S = network_scatter(device, 1.55)
np.set_printoptions(precision=3, suppress=True)
print("\n|S|^2 at 1550 nm\n", np.abs(S) ** 2)
print("column power (coupler loss only):", np.sum(np.abs(S) ** 2, axis=0))
print("largest singular value:", np.linalg.svd(S, compute_uv=False).max())
