"""
Objective evaluation and its exact gradient by a hand-written reverse pass.

The forward pass propagates the injected field through the mesh and keeps a
tape of the field entering each phase screen. The reverse pass walks the tape
backwards, carrying the adjoint ``g = dJ/dRe(z) + j dJ/dIm(z)`` of every
complex intermediate ``z``; for a linear map ``z = A x`` this gives
``g_x = A^H g_z``, and for ``z = exp(-j theta) x`` it gives
``dJ/dtheta = Re(conj(g_z) * (-j z))``.
"""

from dataclasses import dataclass, field
import csv

import numpy as np

from .mesh import TAPER_NAMES, prepare_physics
from .objective import penalty_and_gradient


@dataclass
class GradientReport:
    value: float
    gradient: np.ndarray
    penalty: float = 0.0
    clamp_flags: dict = field(default_factory=dict)


def _check_shapes(device, objective):
    n = device.topology.n_ports
    if objective.targets.shape[1] != n:
        raise ValueError(
            f"objective has {objective.targets.shape[1]} outputs, device has {n} ports"
        )
    if not 0 <= objective.input_port < n:
        raise ValueError(f"input port {objective.input_port} out of range for {n} ports")


def _global_phase_slot(topo, port):
    """(unit, screen) of the first phase screen met by the injected light.

    Light still sits on the input port alone at that point, so the screen
    only sets a global phase and no power depends on it. The objective skips
    the multiplication, making the invariance exact instead of leaving a
    rounding-level dependence that finite differences would pick up.
    """
    u = 0
    for pairs in topo.layers:
        for (a, b) in pairs:
            if port in (a, b):
                return (u, 0 if port == a else 1)
            u += 1
    return None


def _forward(device, objective):
    _check_shapes(device, objective)
    lam = objective.wavelengths_nm * 1e-3
    phys = prepare_physics(device, lam)
    topo = device.topology
    nq = lam.size

    ph = np.exp(-1j * phys.phi)
    ct = ph * phys.t                  # diagonal of e^{-j phi} C
    cq = ph * (-1j * phys.q)          # off-diagonal
    e_theta = np.exp(-1j * phys.theta)
    e_pass = np.exp(-1j * phys.passthrough)

    v = np.zeros((nq, topo.n_ports), dtype=np.result_type(e_theta, complex))
    v[:, objective.input_port] = 1.0
    tape = []
    skip = _global_phase_slot(topo, objective.input_port)
    u = 0
    for ell, pairs in enumerate(topo.layers):
        for p in topo.passthrough(ell):
            v[:, p] = e_pass * v[:, p]
        for (a, b) in pairs:
            x0, x1 = v[:, a], v[:, b]
            # input phase screen
            y0 = x0 if skip == (u, 0) else e_theta[u, 0] * x0
            y1 = x1 if skip == (u, 1) else e_theta[u, 1] * x1
            first = (y0, y1)
            # first coupler
            z0 = ct * y0 + cq * y1
            z1 = cq * y0 + ct * y1
            # mid phase screen
            z0, z1 = e_theta[u, 2] * z0, e_theta[u, 3] * z1
            second = (z0, z1)
            # second coupler
            v[:, a] = ct * z0 + cq * z1
            v[:, b] = cq * z0 + ct * z1
            tape.append((first, second))
            u += 1
    return phys, (ct, cq, e_theta, e_pass), v, (tape, skip)


def _loss_terms(device, objective, amp):
    if objective.quantity == "power":
        T = amp.real ** 2 + amp.imag ** 2
    else:
        T = np.abs(amp)
    widths = device.widths().reshape(-1, device.xi)
    P, dP = penalty_and_gradient(widths, objective.alpha1, objective.alpha2,
                                 objective.w_ref_nm * 1e-3)
    scale = np.exp(-P)
    resid = T * scale - objective.targets
    J = np.sum(resid * resid) / objective.n_wavelengths
    return T, P, dP, scale, resid, J


def _objective(device, objective):
    _, _, amp, _ = _forward(device, objective)
    return _loss_terms(device, objective, amp)[-1]


def evaluate_objective(device, objective):
    """Mean over wavelengths of the summed squared error of all outputs.

    The regularizer enters as a loss factor exp(-P) on the simulated
    transmission.
    """
    return float(_objective(device, objective))


def gradient(device, objective):
    """Objective value and its gradient with respect to ``device.params``."""
    phys, (ct, cq, e_theta, e_pass), amp, (tape, skip) = _forward(device, objective)
    T, P, dP, scale, resid, J = _loss_terms(device, objective, amp)
    Q = objective.n_wavelengths
    topo = device.topology

    g_T = 2.0 * resid * scale / Q
    g_P = -float(np.sum(g_T * T))
    if objective.quantity == "power":
        g = g_T * 2.0 * amp
    else:
        mag = np.abs(amp)
        g = g_T * np.where(mag > 0, amp / np.where(mag > 0, mag, 1.0), 0.0)

    g_theta = np.zeros_like(phys.theta)
    ct_c, cq_c = np.conj(ct), np.conj(cq)
    conj_pass = np.conj(e_pass)
    u = topo.n_units
    for ell in range(topo.n_layers - 1, -1, -1):
        for (a, b) in reversed(topo.layers[ell]):
            u -= 1
            (y0, y1), (z0, z1) = tape[u]
            ga, gb = g[:, a], g[:, b]
            # second coupler
            h0 = ct_c * ga + cq_c * gb
            h1 = cq_c * ga + ct_c * gb
            # mid phase screen
            g_theta[u, 2] = np.real(np.conj(h0) * (-1j * z0))
            g_theta[u, 3] = np.real(np.conj(h1) * (-1j * z1))
            h0, h1 = np.conj(e_theta[u, 2]) * h0, np.conj(e_theta[u, 3]) * h1
            # first coupler
            k0 = ct_c * h0 + cq_c * h1
            k1 = cq_c * h0 + ct_c * h1
            # input phase screen
            g_theta[u, 0] = np.real(np.conj(k0) * (-1j * y0))
            g_theta[u, 1] = np.real(np.conj(k1) * (-1j * y1))
            g[:, a] = np.conj(e_theta[u, 0]) * k0
            g[:, b] = np.conj(e_theta[u, 1]) * k1
        for p in topo.passthrough(ell):
            g[:, p] = conj_pass * g[:, p]

    if skip is not None:
        g_theta[skip] = 0.0
    g_w = np.einsum("utq,utqk->utk", g_theta, phys.d_widths)
    g_w += g_P * dP.reshape(g_w.shape)
    g_L = np.einsum("utq,utq->ut", g_theta, phys.d_length)
    grad = np.concatenate([g_w, g_L[..., None]], axis=-1).reshape(-1)

    _, inside = device.clipped_params()
    grad = np.where(inside, grad, 0.0)
    flags = {
        "parameter_clip": int(np.count_nonzero(~inside)),
        "width_domain": phys.clamped_samples,
    }
    return GradientReport(float(J), grad, float(P), flags)


# ---------------------------------------------------------------------------
# Finite-difference oracle
# ---------------------------------------------------------------------------

def _steps(device, h, h_length):
    return np.where(device.is_length(), h if h_length is None else h_length, h)


def finite_difference_gradient(device, objective, h=1e-6, h_length=1e-5, indices=None,
                               extended=True):
    """Central differences of the objective for the selected parameters.

    With ``extended`` the objective is evaluated in long double, which keeps
    the rounding noise of J well below the differences being resolved.
    """
    dtype = np.longdouble if extended else float
    x0 = device.params.astype(dtype)
    steps = _steps(device, h, h_length)
    idx = np.arange(x0.size) if indices is None else np.asarray(indices)
    out = np.empty(idx.size)
    for n, i in enumerate(idx):
        xp, xm = x0.copy(), x0.copy()
        xp[i] += steps[i]
        xm[i] -= steps[i]
        jp = _objective(device.with_params(xp), objective)
        jm = _objective(device.with_params(xm), objective)
        # divide by the realized step, not the nominal one
        out[n] = (jp - jm) / (xp[i] - xm[i])
    return out


def away_from_bounds(device, h=1e-6, h_length=1e-5):
    """Indices of parameters at least two steps inside their clip interval."""
    steps = _steps(device, h, h_length)
    x = device.params
    ok = (x - device.lower_bounds() >= 2 * steps) & (device.upper_bounds() - x >= 2 * steps)
    return np.flatnonzero(ok)


def relative_errors(analytic, numeric, floor=1e-12):
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def finite_difference_check(device, objective, h=1e-6, h_length=1e-5, indices=None,
                            extended=True):
    """Worst relative error between the reverse-mode and central-difference gradients.

    By default only parameters at least two steps away from a clip bound are
    compared.
    """
    if h <= 0 or (h_length is not None and h_length <= 0):
        raise ValueError("finite-difference steps must be positive")
    if indices is None:
        indices = away_from_bounds(device, h, h_length)
    indices = np.asarray(indices, dtype=int)
    if indices.size == 0:
        return 0.0
    report = gradient(device, objective)
    fd = finite_difference_gradient(device, objective, h, h_length, indices, extended)
    return float(np.max(relative_errors(report.gradient[indices], fd)))


def write_gradient_csv(path, device, report):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["param_index", "unit", "taper", "slot", "value", "gradient"])
        for i, (x, gi) in enumerate(zip(device.params, report.gradient)):
            unit, taper, slot = device.param_coords(i)
            slot_name = "length" if slot == device.xi else f"w{slot + 1}"
            writer.writerow([i, unit, TAPER_NAMES[taper], slot_name, repr(float(x)), repr(float(gi))])
