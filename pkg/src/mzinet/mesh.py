"""
Mesh topology, device parameter layout, and forward transfer-matrix simulation.

Ports are 0-based in the Python API. Files written for people (spectrum CSV,
geometry JSON, design specs) number ports from 1.
"""

from dataclasses import dataclass, field, replace
import csv
import json
import math

import numpy as np

from .waveguide import (
    DEFAULT_COUPLER,
    DEFAULT_INDEX_MODEL,
    CouplerModel,
    EffectiveIndexModel,
    TaperProfile,
    as_real,
    build_coupler_table,
    effective_index,
    interpolate_coupler,
    taper_phases,
)

# taper positions inside one MZI, in parameter-vector order
TAPER_NAMES = ("input_top", "input_bottom", "mid_top", "mid_bottom")


# ---------------------------------------------------------------------------
# Topology
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NetworkTopology:
    """MZI placement for an N-port, M-layer rectangular mesh.

    ``layers[l]`` lists the (upper, lower) port pairs carrying an MZI in
    layer ``l``; ``units`` flattens them in parameter-vector order.
    """

    n_ports: int
    n_layers: int
    layers: tuple

    @property
    def units(self):
        return tuple((layer, pair) for layer, pairs in enumerate(self.layers) for pair in pairs)

    @property
    def n_units(self):
        return sum(len(pairs) for pairs in self.layers)

    def passthrough(self, layer):
        """Ports without an MZI in ``layer``."""
        used = {p for pair in self.layers[layer] for p in pair}
        return tuple(p for p in range(self.n_ports) if p not in used)


def build_topology(n_ports, n_layers):
    """Alternating rectangular mesh.

    Odd layers (counting from 1) couple ports (1,2), (3,4), ...; even layers
    couple (2,3), (4,5), .... A two-port mesh has one MZI in every layer.
    """
    if int(n_ports) != n_ports or n_ports < 2:
        raise ValueError(f"port count must be an integer >= 2, got {n_ports}")
    if int(n_layers) != n_layers or n_layers < 1:
        raise ValueError(f"layer count must be an integer >= 1, got {n_layers}")
    n_ports, n_layers = int(n_ports), int(n_layers)
    layers = []
    for ell in range(n_layers):
        start = 0 if (ell % 2 == 0 or n_ports == 2) else 1
        layers.append(tuple((p, p + 1) for p in range(start, n_ports - 1, 2)))
    return NetworkTopology(n_ports, n_layers, tuple(layers))


def mzi_count(n_ports, n_layers):
    if n_ports == 2:
        return n_layers
    return -(-n_layers // 2) * (n_ports // 2) + (n_layers // 2) * ((n_ports - 1) // 2)


def trainable_parameter_count(n_ports, n_layers, xi):
    """Number of trainable widths and lengths in the mesh."""
    for name, val, lo in (("port count", n_ports, 2), ("layer count", n_layers, 1), ("xi", xi, 1)):
        if int(val) != val or val < lo:
            raise ValueError(f"{name} must be an integer >= {lo}, got {val}")
    return 4 * (int(xi) + 1) * mzi_count(int(n_ports), int(n_layers))


def default_input_port(n_ports):
    """0-based index of input number floor(N/2) (1-based)."""
    return max(n_ports // 2 - 1, 0)


# ---------------------------------------------------------------------------
# Device state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TaperBounds:
    """Fixed geometry of every taper, in um."""

    w_default: float = 0.45
    w_min: float = 0.40
    w_max: float = 0.52
    l_min: float = 6.0
    l_max: float = 10.0


@dataclass(frozen=True, eq=False)
class DeviceState:
    """A mesh plus every trainable taper parameter.

    ``params`` is laid out as ``[unit][taper][slot]`` with slots
    ``0..xi-1`` the interior widths and slot ``xi`` the taper length (all um).
    """

    topology: NetworkTopology
    params: np.ndarray
    xi: int = 5
    etch_offset: float = 0.0
    bounds: TaperBounds = field(default_factory=TaperBounds)
    index_model: EffectiveIndexModel = DEFAULT_INDEX_MODEL
    coupler_model: CouplerModel = DEFAULT_COUPLER
    passthrough_phase: bool = False
    n_z: int = 201

    def __post_init__(self):
        x = as_real(self.params).copy()
        expected = 4 * (self.xi + 1) * self.topology.n_units
        if x.shape != (expected,):
            raise ValueError(f"parameter vector has shape {x.shape}, expected ({expected},)")
        x.setflags(write=False)
        object.__setattr__(self, "params", x)

    @property
    def n_params(self):
        return self.params.size

    @property
    def slots(self):
        return self.xi + 1

    def param_index(self, unit, taper, slot):
        if not (0 <= unit < self.topology.n_units and 0 <= taper < 4 and 0 <= slot <= self.xi):
            raise IndexError((unit, taper, slot))
        return (unit * 4 + taper) * self.slots + slot

    def param_coords(self, index):
        if not 0 <= index < self.n_params:
            raise IndexError(index)
        ut, slot = divmod(index, self.slots)
        unit, taper = divmod(ut, 4)
        return unit, taper, slot

    def is_length(self):
        """Boolean mask of parameter slots holding a taper length."""
        mask = np.zeros((self.topology.n_units, 4, self.slots), dtype=bool)
        mask[..., self.xi] = True
        return mask.reshape(-1)

    def lower_bounds(self):
        return np.where(self.is_length(), self.bounds.l_min, self.bounds.w_min)

    def upper_bounds(self):
        return np.where(self.is_length(), self.bounds.l_max, self.bounds.w_max)

    def clipped_params(self):
        """Parameters clipped to their bounds and the mask of slots passing gradient.

        A slot sitting exactly on a bound still passes its gradient; only slots
        strictly outside are cut.
        """
        lo, hi = self.lower_bounds(), self.upper_bounds()
        inside = (self.params >= lo) & (self.params <= hi)
        return np.clip(self.params, lo, hi), inside

    def with_params(self, params):
        return replace(self, params=params)

    def widths(self):
        """Interior widths as (n_units, 4, xi), after clipping."""
        x, _ = self.clipped_params()
        return x.reshape(-1, 4, self.slots)[..., : self.xi]

    def lengths(self):
        x, _ = self.clipped_params()
        return x.reshape(-1, 4, self.slots)[..., self.xi]

    def mzi_length(self):
        return 2 * self.bounds.l_max + 2 * self.coupler_model.length

    def device_length(self):
        return self.topology.n_layers * self.mzi_length()

    def unit(self, index):
        """The ``MziUnit`` view of one MZI."""
        w, L = self.widths()[index], self.lengths()[index]
        tapers = tuple(
            TaperProfile(tuple(w[k]), float(L[k]), self.bounds.w_default, self.bounds.l_max, self.n_z)
            for k in range(4)
        )
        return MziUnit(tapers, self.coupler_model, self.index_model)


@dataclass(frozen=True)
class MziUnit:
    """Four tapers (input top/bottom, mid top/bottom) and the shared coupler."""

    tapers: tuple
    coupler_model: CouplerModel = DEFAULT_COUPLER
    index_model: EffectiveIndexModel = DEFAULT_INDEX_MODEL


# ---------------------------------------------------------------------------
# Forward simulation
# ---------------------------------------------------------------------------

@dataclass
class Physics:
    """Wavelength-resolved quantities feeding the transfer matrices."""

    wavelengths: np.ndarray   # (Q,) um
    theta: np.ndarray         # (U, 4, Q)
    d_widths: np.ndarray      # (U, 4, Q, xi)
    d_length: np.ndarray      # (U, 4, Q)
    t: np.ndarray             # (Q,)
    q: np.ndarray
    phi: np.ndarray
    passthrough: np.ndarray   # (Q,) phase of a pass-through port, zero if disabled
    clamped_samples: int = 0


def prepare_physics(device, lam):
    """Taper phases, their Jacobians, and coupler values at wavelengths ``lam`` (um)."""
    lam = np.atleast_1d(as_real(lam)).astype(device.params.dtype)
    b = device.bounds
    shift = device.etch_offset * 1e-3
    n_units = device.topology.n_units
    widths = device.widths().reshape(n_units * 4, device.xi)
    lengths = device.lengths().reshape(n_units * 4)
    tp = taper_phases(widths, lengths, lam, b.w_default, b.l_max,
                      device.index_model, device.n_z, shift)
    table = build_coupler_table(device.etch_offset, device.coupler_model)
    cp = interpolate_coupler(table, lam, preserve_power=True)
    if device.passthrough_phase:
        n = effective_index(b.w_default + shift, lam, device.index_model)
        passthrough = 2 * math.pi / lam * n * device.mzi_length()
    else:
        passthrough = np.zeros_like(lam)
    nq = lam.size
    return Physics(
        lam,
        tp.theta.reshape(n_units, 4, nq),
        tp.d_widths.reshape(n_units, 4, nq, device.xi),
        tp.d_length.reshape(n_units, 4, nq),
        np.atleast_1d(cp.t), np.atleast_1d(cp.q), np.atleast_1d(cp.phi),
        passthrough,
        tp.clamped_samples,
    )


def _coupler_matrix(t, q, phi):
    # e^{-j phi} [[t, -jq], [-jq, t]], shape (Q, 2, 2)
    ph = np.exp(-1j * phi)
    c = np.empty(t.shape + (2, 2), dtype=complex)
    c[..., 0, 0] = c[..., 1, 1] = ph * t
    c[..., 0, 1] = c[..., 1, 0] = ph * (-1j * q)
    return c


def _phase_matrix(theta_a, theta_b):
    d = np.zeros(theta_a.shape + (2, 2), dtype=complex)
    d[..., 0, 0] = np.exp(-1j * theta_a)
    d[..., 1, 1] = np.exp(-1j * theta_b)
    return d


def mzi_matrices(theta, t, q, phi):
    """2x2 MZI transfer matrices from taper phases ``theta`` (..., 4, Q).

    T = [e^{-j phi} C] D(theta21, theta22) [e^{-j phi} C] D(theta11, theta12)
    """
    c = _coupler_matrix(t, q, phi)
    d1 = _phase_matrix(theta[..., 0, :], theta[..., 1, :])
    d2 = _phase_matrix(theta[..., 2, :], theta[..., 3, :])
    return c @ d2 @ c @ d1


def mzi_transfer(unit, lam, etch_offset=0.0):
    """Transfer matrix of one MZI; (2, 2) for scalar ``lam``, else (Q, 2, 2)."""
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    shift = etch_offset * 1e-3
    tp = unit.tapers[0]
    widths = np.array([p.interior_widths for p in unit.tapers])
    lengths = np.array([p.length for p in unit.tapers])
    phases = taper_phases(widths, lengths, lam_arr, tp.end_width, tp.max_length,
                          unit.index_model, tp.n_z, shift)
    cp = interpolate_coupler(build_coupler_table(etch_offset, unit.coupler_model), lam_arr,
                            preserve_power=True)
    T = mzi_matrices(phases.theta, cp.t, cp.q, cp.phi)
    return T[0] if np.ndim(lam) == 0 else T


def layer_matrices(device, physics):
    """Per-layer N x N matrices, shape (M, Q, N, N)."""
    topo = device.topology
    nq = physics.wavelengths.size
    blocks = mzi_matrices(physics.theta, physics.t, physics.q, physics.phi)  # (U, Q, 2, 2)
    pass_phase = np.exp(-1j * physics.passthrough)
    out = np.zeros((topo.n_layers, nq, topo.n_ports, topo.n_ports), dtype=complex)
    u = 0
    for ell, pairs in enumerate(topo.layers):
        for p in topo.passthrough(ell):
            out[ell, :, p, p] = pass_phase
        for (a, b) in pairs:
            out[ell, :, a:b + 1, a:b + 1] = blocks[u]
            u += 1
    return out


def network_scatter(device, lam):
    """Scattering matrix S(lam); (N, N) for scalar ``lam``, else (Q, N, N).

    Layers multiply onto the left of the running product, input to output.
    """
    physics = prepare_physics(device, lam)
    n = device.topology.n_ports
    S = np.broadcast_to(np.eye(n, dtype=complex), (physics.wavelengths.size, n, n)).copy()
    for layer in layer_matrices(device, physics):
        S = layer @ S
    return S[0] if np.ndim(lam) == 0 else S


def simulate_spectrum(device, wavelengths_nm, input_port=None):
    """Output power per port versus wavelength, shape (Q, N).

    ``input_port`` is 0-based; it defaults to input number floor(N/2).
    """
    if input_port is None:
        input_port = default_input_port(device.topology.n_ports)
    if not 0 <= input_port < device.topology.n_ports:
        raise ValueError(f"input port {input_port} out of range")
    lam = np.asarray(wavelengths_nm, dtype=float) * 1e-3
    S = network_scatter(device, np.atleast_1d(lam))
    return np.abs(S[:, :, input_port]) ** 2


# ---------------------------------------------------------------------------
# File interfaces
# ---------------------------------------------------------------------------

def write_spectrum_csv(path, wavelengths_nm, spectrum):
    spectrum = np.asarray(spectrum)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["wavelength_nm"] + [f"out_{k + 1}" for k in range(spectrum.shape[1])])
        for lam, row in zip(wavelengths_nm, spectrum):
            writer.writerow([repr(float(lam))] + [repr(float(v)) for v in row])


def read_spectrum_csv(path):
    """Returns ``(wavelengths_nm, spectrum)``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "wavelength_nm":
            raise ValueError(f"not a spectrum CSV: header {header!r}")
        rows = np.array([[float(v) for v in row] for row in reader if row])
    return rows[:, 0], rows[:, 1:]


def geometry_document(device):
    """JSON-ready description of every MZI's tapers and coupler placements."""
    b = device.bounds
    mzi_len = device.mzi_length()
    dc_len = device.coupler_model.length
    w, L = device.widths(), device.lengths()
    mzis = []
    for u, (layer, (pa, pb)) in enumerate(device.topology.units):
        x0 = layer * mzi_len
        tapers = []
        for k, name in enumerate(TAPER_NAMES):
            section = 0 if k < 2 else 1
            tapers.append({
                "position": name,
                "x_offset_um": x0 + section * (b.l_max + dc_len),
                "widths_nm": [float(v) * 1e3 for v in w[u, k]],
                "length_um": float(L[u, k]),
                "pad_length_um": float(b.l_max - L[u, k]),
            })
        mzis.append({
            "unit": u,
            "layer": layer + 1,
            "ports": [pa + 1, pb + 1],
            "x_offset_um": x0,
            "tapers": tapers,
            "couplers": [
                {"x_offset_um": x0 + b.l_max, "length_um": dc_len},
                {"x_offset_um": x0 + 2 * b.l_max + dc_len, "length_um": dc_len},
            ],
        })
    cm = device.coupler_model
    im = device.index_model
    return {
        "format": "mzinet-geometry/1",
        "n_ports": device.topology.n_ports,
        "n_layers": device.topology.n_layers,
        "xi": device.xi,
        "etch_offset_nm": device.etch_offset,
        "end_width_nm": b.w_default * 1e3,
        "bounds": {
            "w_min_nm": b.w_min * 1e3, "w_max_nm": b.w_max * 1e3,
            "l_min_um": b.l_min, "l_max_um": b.l_max,
        },
        "mzi_length_um": mzi_len,
        "device_length_um": device.device_length(),
        "passthrough_phase": device.passthrough_phase,
        "n_z": device.n_z,
        "coupler_model": {
            "dispersion_per_um": cm.dispersion, "etch_slope_per_nm": cm.etch_slope,
            "insertion_loss_db": cm.insertion_loss_db, "length_um": cm.length,
            "width_um": cm.width, "center_wavelength_um": cm.center_wavelength,
        },
        "index_model": {
            "n0": im.n0, "dn_dw": im.dn_dw, "dn_dlam": im.dn_dlam, "cross": im.cross,
            "w0": im.w0, "lam0": im.lam0,
            "width_range": list(im.width_range), "wavelength_range": list(im.wavelength_range),
        },
        "mzis": mzis,
        # exact values; the nm/um fields above are rounded by unit conversion
        "parameters_um": [float(v) for v in device.params],
    }


def device_from_geometry(doc):
    """Rebuild a ``DeviceState`` from ``geometry_document`` output."""
    topo = build_topology(doc["n_ports"], doc["n_layers"])
    xi = int(doc["xi"])
    bd = doc["bounds"]
    bounds = TaperBounds(doc["end_width_nm"] / 1e3, bd["w_min_nm"] / 1e3, bd["w_max_nm"] / 1e3,
                         bd["l_min_um"], bd["l_max_um"])
    im = doc["index_model"]
    index_model = EffectiveIndexModel(im["n0"], im["dn_dw"], im["dn_dlam"], im["cross"],
                                      im["w0"], im["lam0"], tuple(im["width_range"]),
                                      tuple(im["wavelength_range"]))
    cm = doc["coupler_model"]
    coupler = CouplerModel(cm["dispersion_per_um"], cm["etch_slope_per_nm"],
                           cm["insertion_loss_db"], cm["length_um"], cm["width_um"],
                           cm["center_wavelength_um"], index_model)
    if "parameters_um" in doc:
        params = np.array(doc["parameters_um"], dtype=float)
    else:
        params = []
        for mzi in sorted(doc["mzis"], key=lambda m: m["unit"]):
            for taper in mzi["tapers"]:
                params.extend(v / 1e3 for v in taper["widths_nm"])
                params.append(taper["length_um"])
        params = np.array(params)
    return DeviceState(topo, params, xi, float(doc.get("etch_offset_nm", 0.0)), bounds,
                       index_model, coupler, bool(doc.get("passthrough_phase", False)),
                       int(doc.get("n_z", 201)))


def write_geometry(path, device):
    with open(path, "w") as fh:
        json.dump(geometry_document(device), fh, indent=2)
        fh.write("\n")


def read_geometry(path):
    with open(path) as fh:
        return device_from_geometry(json.load(fh))
