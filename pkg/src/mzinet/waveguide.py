"""
Surrogate waveguide physics: effective index, custom taper phase, and the
directional-coupler spectrum with its linear-interpolation lookup table.

All lengths and widths are in micrometers, etch offsets in nanometers.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import csv
import math

import numpy as np

from .errors import OutOfRangeError


def as_real(value):
    """Float array, keeping extended precision when the input has it."""
    arr = np.asarray(value)
    return arr if arr.dtype == np.longdouble else arr.astype(float)


def _check_finite(name, value):
    arr = as_real(value)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return arr


# ---------------------------------------------------------------------------
# Effective index
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EffectiveIndexModel:
    """Bilinear surrogate for the fundamental-mode index of a strip waveguide.

    n(w, lam) = n0 + dn_dw*(w - w0) + dn_dlam*(lam - lam0)
                + cross*(w - w0)*(lam - lam0)

    Any object with ``index``, ``index_dw``, ``clamp``, ``width_range`` and
    ``wavelength_range`` can stand in for this class (e.g. a tabulated model).
    """

    n0: float = 2.45
    dn_dw: float = 1.20
    dn_dlam: float = -1.80
    cross: float = -0.60
    w0: float = 0.45
    lam0: float = 1.55
    width_range: tuple = (0.35, 0.60)
    wavelength_range: tuple = (1.2, 1.7)

    def clamp(self, w, lam):
        """Clamp inputs to the valid domain.

        Returns ``(w_c, lam_c, w_clamped, lam_clamped)`` where the last two are
        boolean masks of the entries that were moved.
        """
        w = as_real(w)
        lam = as_real(lam)
        w_lo, w_hi = self.width_range
        l_lo, l_hi = self.wavelength_range
        w_c = np.clip(w, w_lo, w_hi)
        lam_c = np.clip(lam, l_lo, l_hi)
        return w_c, lam_c, w_c != w, lam_c != lam

    def index(self, w, lam):
        """Evaluate the polynomial without clamping."""
        dw = as_real(w) - self.w0
        dl = as_real(lam) - self.lam0
        return self.n0 + self.dn_dw * dw + self.dn_dlam * dl + self.cross * dw * dl

    def index_dw(self, w, lam):
        """Partial derivative of ``index`` with respect to width."""
        dl = as_real(lam) - self.lam0
        return self.dn_dw + self.cross * dl + 0.0 * as_real(w)


DEFAULT_INDEX_MODEL = EffectiveIndexModel()


def effective_index(w, lam, model=DEFAULT_INDEX_MODEL, return_clamped=False):
    """Effective index at width ``w`` and wavelength ``lam`` (both um).

    Inputs outside the model's domain are clamped to its boundary. With
    ``return_clamped=True`` a boolean mask of clamped entries is returned too.
    """
    w = _check_finite("width", w)
    lam = _check_finite("wavelength", lam)
    w_c, lam_c, w_flag, lam_flag = model.clamp(w, lam)
    n = model.index(w_c, lam_c)
    if np.ndim(n) == 0:
        n = float(n)
    if return_clamped:
        return n, np.logical_or(w_flag, lam_flag)
    return n


# ---------------------------------------------------------------------------
# Taper geometry and phase
# ---------------------------------------------------------------------------

def sample_count(xi, n_z=201):
    """Number of axial samples used to integrate a taper with ``xi`` widths.

    The count is the smallest value >= ``n_z`` whose intervals divide evenly
    into the ``xi + 1`` profile segments, so every control point is a sample.
    """
    segments = xi + 1
    per_segment = -(-(n_z - 1) // segments)
    return segments * per_segment + 1


@lru_cache(maxsize=64)
def _profile_basis(xi, n_samples):
    # row k: weights of the xi+2 control widths at axial fraction k/(n-1)
    u = np.linspace(0.0, 1.0, n_samples)
    nodes = np.linspace(0.0, 1.0, xi + 2)
    basis = np.empty((n_samples, xi + 2))
    eye = np.eye(xi + 2)
    for j in range(xi + 2):
        basis[:, j] = np.interp(u, nodes, eye[j])
    basis.setflags(write=False)
    return basis


@lru_cache(maxsize=64)
def _trapezoid_weights(n_samples):
    wts = np.full(n_samples, 1.0 / (n_samples - 1))
    wts[0] *= 0.5
    wts[-1] *= 0.5
    wts.setflags(write=False)
    return wts


@dataclass(frozen=True)
class TaperProfile:
    """One custom taper: fixed end widths with ``xi`` interior control widths.

    The width profile is piecewise-linear through
    ``[end_width, *interior_widths, end_width]`` at equally spaced positions
    along ``length``. A straight ``end_width`` pad of ``max_length - length``
    follows the taper.
    """

    interior_widths: tuple
    length: float
    end_width: float = 0.45
    max_length: float = 10.0
    n_z: int = 201

    def __post_init__(self):
        object.__setattr__(self, "interior_widths", tuple(float(w) for w in self.interior_widths))
        if len(self.interior_widths) < 1:
            raise ValueError("a taper needs at least one interior width")
        _check_finite("interior widths", self.interior_widths)
        _check_finite("length", self.length)
        if not 0 < self.length <= self.max_length:
            raise ValueError(
                f"taper length {self.length} outside (0, {self.max_length}]"
            )

    @property
    def xi(self):
        return len(self.interior_widths)

    @property
    def pad_length(self):
        return self.max_length - self.length

    @property
    def control_widths(self):
        return np.array([self.end_width, *self.interior_widths, self.end_width])

    @property
    def control_positions(self):
        return np.linspace(0.0, self.length, self.xi + 2)

    def width_at(self, z):
        """Width of the profile at axial position ``z`` (um)."""
        return np.interp(z, self.control_positions, self.control_widths)


@dataclass
class TaperPhases:
    """Phases of a batch of tapers together with their local Jacobians.

    ``theta`` has shape (n_tapers, n_wavelengths); ``d_widths`` has shape
    (n_tapers, n_wavelengths, xi); ``d_length`` matches ``theta``.
    """

    theta: np.ndarray
    d_widths: np.ndarray
    d_length: np.ndarray
    clamped_samples: int = 0


def taper_phases(widths, lengths, lam, end_width=0.45, max_length=10.0,
                 model=DEFAULT_INDEX_MODEL, n_z=201, width_shift=0.0):
    """Vectorized taper phase over many tapers and wavelengths.

    ``widths`` is (n_tapers, xi), ``lengths`` is (n_tapers,), ``lam`` is
    (n_wavelengths,). ``width_shift`` (um) is added to every width, fixed ends
    and pad included. Samples clamped by the index model contribute zero to
    the width Jacobian.
    """
    widths = np.atleast_2d(as_real(widths))
    lengths = as_real(lengths).reshape(-1)
    lam = np.atleast_1d(as_real(lam))
    n_tapers, xi = widths.shape

    n_samples = sample_count(xi, n_z)
    basis = _profile_basis(xi, n_samples)
    tw = _trapezoid_weights(n_samples)

    ends = np.full((n_tapers, 1), end_width, dtype=widths.dtype)
    control = np.concatenate([ends, widths, ends], axis=1) + width_shift
    samples = control @ basis.T                                   # (T, S)

    w_c, lam_c, w_flag, _ = model.clamp(samples[:, None, :], lam[None, :, None])
    n_samp = model.index(w_c, lam_c)                              # (T, Q, S)
    dn_samp = np.where(w_flag, 0.0, model.index_dw(w_c, lam_c))

    pad_w, pad_l, _, _ = model.clamp(end_width + width_shift, lam)
    n_pad = model.index(pad_w, pad_l)                             # (Q,)

    k0 = 2.0 * math.pi / lam                                      # (Q,)
    mean_index = n_samp @ tw                                      # (T, Q)
    pad = max_length - lengths
    theta = k0 * (lengths[:, None] * mean_index + n_pad[None, :] * pad[:, None])

    d_length = k0 * (mean_index - n_pad[None, :])
    # d(mean_index)/d(w_j) = sum_k tw_k * dn_k * basis[k, j+1]
    inner = basis[:, 1:xi + 1] * tw[:, None]                      # (S, xi)
    d_widths = (k0[None, :, None] * lengths[:, None, None]) * (dn_samp @ inner)
    return TaperPhases(theta, d_widths, d_length, int(np.count_nonzero(w_flag)))


def taper_phase(profile, lam, model=DEFAULT_INDEX_MODEL, width_shift=0.0):
    """Accumulated phase (rad) of one taper plus its straight pad."""
    lam_arr = _check_finite("wavelength", lam)
    res = taper_phases(
        np.array([profile.interior_widths]),
        np.array([profile.length]),
        np.atleast_1d(lam_arr),
        end_width=profile.end_width,
        max_length=profile.max_length,
        model=model,
        n_z=profile.n_z,
        width_shift=width_shift,
    )
    theta = res.theta[0]
    return float(theta[0]) if np.ndim(lam_arr) == 0 else theta


# ---------------------------------------------------------------------------
# Directional coupler
# ---------------------------------------------------------------------------

COUPLER_WAVELENGTH_RANGE = (1.2, 1.7)
ETCH_OFFSET_RANGE = (-20.0, 20.0)


@dataclass(frozen=True)
class CouplerPoint:
    """Through amplitude ``t``, cross amplitude ``q`` and common phase ``phi``."""

    t: object
    q: object
    phi: object


@dataclass(frozen=True)
class CouplerModel:
    """Coupled-mode surrogate of the 50% directional coupler.

    Coupling angle c = (pi/4) * (1 + dispersion*(lam - lam0) + etch_slope*dw).
    """

    dispersion: float = 2.0          # 1/um
    etch_slope: float = -0.004       # 1/nm
    insertion_loss_db: float = 0.02
    length: float = 30.0             # um
    width: float = 0.45              # um
    center_wavelength: float = 1.55  # um
    index_model: EffectiveIndexModel = field(default=DEFAULT_INDEX_MODEL)

    @property
    def amplitude(self):
        return 10.0 ** (-self.insertion_loss_db / 20.0)


DEFAULT_COUPLER = CouplerModel()


def _check_coupler_domain(lam, etch_offset):
    lam = _check_finite("wavelength", lam)
    dw = float(_check_finite("etch offset", etch_offset))
    lo, hi = COUPLER_WAVELENGTH_RANGE
    if np.any(lam < lo) or np.any(lam > hi):
        raise ValueError(f"wavelength outside [{lo}, {hi}] um")
    if not ETCH_OFFSET_RANGE[0] <= dw <= ETCH_OFFSET_RANGE[1]:
        raise ValueError(f"etch offset {dw} nm outside {ETCH_OFFSET_RANGE}")
    return lam, dw


def coupler_response(lam, etch_offset=0.0, model=DEFAULT_COUPLER):
    """Directional-coupler response at ``lam`` (um) for an etch offset (nm)."""
    lam, dw = _check_coupler_domain(lam, etch_offset)
    angle = (math.pi / 4) * (
        1.0 + model.dispersion * (lam - model.center_wavelength) + model.etch_slope * dw
    )
    a = model.amplitude
    n = effective_index(model.width + dw * 1e-3, lam, model.index_model)
    phi = 2.0 * math.pi / lam * n * model.length
    t, q = a * np.cos(angle), a * np.sin(angle)
    if np.ndim(lam) == 0:
        return CouplerPoint(float(t), float(q), float(phi))
    return CouplerPoint(t, q, phi)


@dataclass(frozen=True, eq=False)
class CouplerSpectrum:
    """Tabulated coupler response on a uniform wavelength grid."""

    wavelengths: np.ndarray
    t: np.ndarray
    q: np.ndarray
    phi: np.ndarray
    etch_offset: float = 0.0

    def __post_init__(self):
        for name in ("wavelengths", "t", "q", "phi"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (len(self.wavelengths) == len(self.t) == len(self.q) == len(self.phi)):
            raise ValueError("coupler table columns differ in length")
        if len(self.wavelengths) < 2 or np.any(np.diff(self.wavelengths) <= 0):
            raise ValueError("coupler table wavelengths must be strictly increasing")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["wavelength_um", "t", "q", "phi_rad"])
            for row in zip(self.wavelengths, self.t, self.q, self.phi):
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, etch_offset=0.0):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header] != ["wavelength_um", "t", "q", "phi_rad"]:
                raise ValueError(f"unexpected coupler table header {header!r}")
            rows = np.array([[float(v) for v in row] for row in reader if row])
        return cls(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3], etch_offset)


@lru_cache(maxsize=32)
def _cached_table(etch_offset, model, n_points):
    lam = np.linspace(*COUPLER_WAVELENGTH_RANGE, n_points)
    pt = coupler_response(lam, etch_offset, model)
    return CouplerSpectrum(lam, pt.t, pt.q, pt.phi, etch_offset)


def build_coupler_table(etch_offset=0.0, model=DEFAULT_COUPLER, n_points=1000):
    """Tabulate the coupler on ``n_points`` uniform wavelengths over 1.2-1.7 um."""
    _check_coupler_domain(1.55, etch_offset)
    return _cached_table(float(etch_offset), model, int(n_points))


def interpolate_coupler(table, lam, preserve_power=False):
    """Componentwise linear interpolation of a coupler table.

    Exact at grid nodes. Raises ``OutOfRangeError`` outside the grid.

    A straight line between two points on the circle t^2 + q^2 = a^2 cuts
    inside it, so plain interpolation loses up to ~1e-7 of power between
    nodes. With ``preserve_power`` the interpolated (t, q) pair is rescaled
    to the interpolated node power, which keeps a lossless coupler unitary.
    """
    lam_arr = _check_finite("wavelength", lam)
    x = np.atleast_1d(lam_arr)
    grid = table.wavelengths
    if np.any(x < grid[0]) or np.any(x > grid[-1]):
        raise OutOfRangeError(
            f"wavelength outside coupler table range [{grid[0]}, {grid[-1]}] um"
        )
    hi = np.clip(np.searchsorted(grid, x, side="right"), 1, len(grid) - 1)
    lo = hi - 1
    frac = (x - grid[lo]) / (grid[hi] - grid[lo])

    def lerp(col):
        val = col[lo] + frac * (col[hi] - col[lo])
        val = np.where(frac == 1.0, col[hi], val)
        return np.where(frac == 0.0, col[lo], val)

    t, q, phi = lerp(table.t), lerp(table.q), lerp(table.phi)
    if preserve_power:
        power = lerp(table.t ** 2 + table.q ** 2)
        scale = np.sqrt(power / (t * t + q * q))
        t, q = t * scale, q * scale
    if np.ndim(lam_arr) == 0:
        return CouplerPoint(float(t[0]), float(q[0]), float(phi[0]))
    return CouplerPoint(t, q, phi)
