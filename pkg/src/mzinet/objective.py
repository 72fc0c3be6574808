"""Design targets and the width regularizers."""

from dataclasses import dataclass

import numpy as np

QUANTITIES = ("power", "amplitude")


@dataclass(frozen=True, eq=False)
class DesignObjective:
    """Target transmission of every output on a wavelength grid.

    ``targets`` has shape (Q, N). ``input_port`` is 0-based. ``quantity``
    selects whether targets are powers |S|^2 (default) or amplitudes |S|.
    """

    wavelengths_nm: np.ndarray
    targets: np.ndarray
    input_port: int = 0
    alpha1: float = 3e-4
    alpha2: float = 1e-4
    w_ref_nm: float = 450.0
    quantity: str = "power"

    def __post_init__(self):
        lam = np.array(self.wavelengths_nm, dtype=float).reshape(-1)
        tgt = np.array(self.targets, dtype=float)
        if tgt.ndim == 1:
            tgt = tgt[:, None]
        problems = []
        if tgt.ndim != 2 or tgt.shape[0] != lam.size:
            problems.append(f"targets shape {tgt.shape} does not match {lam.size} wavelengths")
        elif np.any(tgt < 0) or np.any(tgt > 1):
            problems.append("targets must lie in [0, 1]")
        elif np.any(tgt.sum(axis=1) > 1 + 1e-12):
            problems.append("targets summed over outputs exceed 1")
        if not np.all(np.isfinite(lam)):
            problems.append("wavelengths must be finite")
        if self.alpha1 < 0 or self.alpha2 < 0:
            problems.append("regularizer weights must be non-negative")
        if self.quantity not in QUANTITIES:
            problems.append(f"quantity must be one of {QUANTITIES}")
        if problems:
            raise ValueError("; ".join(problems))
        for arr in (lam, tgt):
            arr.setflags(write=False)
        object.__setattr__(self, "wavelengths_nm", lam)
        object.__setattr__(self, "targets", tgt)

    @property
    def n_wavelengths(self):
        return self.wavelengths_nm.size


def _width_array(widths):
    if hasattr(widths, "widths"):
        return widths.widths().reshape(-1, widths.xi)
    return np.atleast_2d(np.asarray(widths, dtype=float))


def penalty_and_gradient(widths, alpha1, alpha2, w_ref):
    """P and dP/dwidths for a (n_tapers, xi) array of widths in um."""
    w = np.atleast_2d(np.asarray(widths))
    diff = w[:, :-1] - w[:, 1:]
    dev = w - w_ref
    p = alpha1 * np.sum(diff * diff) + alpha2 * np.sum(dev * dev)
    grad = 2 * alpha2 * dev
    grad[:, :-1] += 2 * alpha1 * diff
    grad[:, 1:] -= 2 * alpha1 * diff
    return p, grad


def regularization_penalty(widths, alpha1=3e-4, alpha2=1e-4, w_ref_nm=450.0):
    """Smoothness plus reference-width penalty over every taper.

    ``widths`` is a ``DeviceState`` or an (n_tapers, xi) array in um;
    squares are taken in um.
    """
    if alpha1 < 0 or alpha2 < 0:
        raise ValueError("regularizer weights must be non-negative")
    p, _ = penalty_and_gradient(_width_array(widths), alpha1, alpha2, w_ref_nm * 1e-3)
    return float(p)
