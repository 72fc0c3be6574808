import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mzinet.errors import OutOfRangeError
from mzinet.waveguide import (
    DEFAULT_INDEX_MODEL,
    CouplerModel,
    CouplerSpectrum,
    TaperProfile,
    build_coupler_table,
    coupler_response,
    effective_index,
    interpolate_coupler,
    sample_count,
    taper_phase,
)

A = 10 ** (-0.02 / 20)

widths = st.floats(0.35, 0.60)
wavelengths = st.floats(1.2, 1.7)


def surrogate(w, lam):
    # written out independently of EffectiveIndexModel
    return 2.45 + 1.2 * (w - 0.45) - 1.8 * (lam - 1.55) - 0.6 * (w - 0.45) * (lam - 1.55)


# effective index

@pytest.mark.parametrize("w, lam, expected", [
    (0.45, 1.55, 2.45),
    (0.52, 1.55, 2.534),
    (0.45, 1.40, 2.72),
])
def test_effective_index_examples(w, lam, expected):
    assert effective_index(w, lam) == pytest.approx(expected, abs=1e-12)


def test_effective_index_clamps_and_flags():
    n, flag = effective_index(np.array([0.30, 0.45]), 1.55, return_clamped=True)
    assert n[0] == pytest.approx(effective_index(0.35, 1.55))
    assert flag.tolist() == [True, False]


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_effective_index_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        effective_index(bad, 1.55)
    with pytest.raises(ValueError):
        effective_index(0.45, bad)


@given(widths, wavelengths, st.floats(1e-4, 0.05))
def test_index_monotone(w, lam, d):
    if w + d <= 0.60:
        assert effective_index(w + d, lam) > effective_index(w, lam)
    if lam + d <= 1.7:
        assert effective_index(w, lam + d) < effective_index(w, lam)


@given(widths, wavelengths)
def test_index_between_oxide_and_silicon(w, lam):
    assert 1.444 < effective_index(w, lam) < 3.48


# taper phase

def test_uniform_taper_phase():
    prof = TaperProfile([0.45] * 5, 10.0)
    assert taper_phase(prof, 1.55) == pytest.approx(2 * math.pi / 1.55 * 24.5, rel=1e-14)
    assert taper_phase(prof, 1.55) == pytest.approx(99.315, abs=1e-3)


def test_padding_equivalence_example():
    full = taper_phase(TaperProfile([0.45] * 5, 10.0), 1.55)
    short = TaperProfile([0.45] * 5, 6.0)
    assert short.pad_length == 4.0
    assert taper_phase(short, 1.55) == pytest.approx(full, rel=1e-14)


@given(st.floats(6.0, 10.0), wavelengths)
def test_padding_equivalence(L, lam):
    ref = taper_phase(TaperProfile([0.45] * 5, 10.0), lam)
    assert taper_phase(TaperProfile([0.45] * 5, L), lam) == pytest.approx(ref, rel=1e-13)


def test_linear_ramp_matches_closed_form():
    # xi = 1: profile 0.45 -> 0.52 -> 0.45; integrate each linear segment exactly
    L, lam = 8.0, 1.50
    prof = TaperProfile([0.52], L)
    k0 = 2 * math.pi / lam
    # n is linear in w, so the mean over a linear ramp is n at the mean width
    seg = 0.5 * L * surrogate(0.485, lam)
    exact = k0 * (2 * seg + surrogate(0.45, lam) * 2.0)
    assert taper_phase(prof, lam) == pytest.approx(exact, rel=1e-9)


def test_profile_passes_through_control_points():
    prof = TaperProfile([0.40, 0.50, 0.42], 8.0)
    z = prof.control_positions
    assert np.allclose(prof.width_at(z), [0.45, 0.40, 0.50, 0.42, 0.45])
    assert np.allclose(z, np.linspace(0, 8, 5))


def test_sample_count_aligns_control_points():
    assert sample_count(5) == 205
    for xi in range(1, 12):
        n = sample_count(xi)
        assert n >= 201 and (n - 1) % (xi + 1) == 0


@settings(max_examples=40)
@given(st.lists(st.floats(0.40, 0.52), min_size=1, max_size=8), st.floats(6.0, 10.0), wavelengths)
def test_trapezoid_converged(ws, L, lam):
    a = taper_phase(TaperProfile(ws, L, n_z=201), lam)
    b = taper_phase(TaperProfile(ws, L, n_z=401), lam)
    assert abs(a - b) / abs(a) < 1e-8


@given(st.lists(st.floats(0.40, 0.52), min_size=5, max_size=5), st.floats(6.0, 10.0), wavelengths)
def test_taper_phase_positive(ws, L, lam):
    assert taper_phase(TaperProfile(ws, L), lam) > 0


def test_taper_profile_validation():
    with pytest.raises(ValueError):
        TaperProfile([], 8.0)
    with pytest.raises(ValueError):
        TaperProfile([0.45], 11.0)
    with pytest.raises(ValueError):
        TaperProfile([math.nan], 8.0)


# coupler

def test_coupler_balanced_at_1550():
    pt = coupler_response(1.55, 0.0)
    assert pt.t == pytest.approx(A / math.sqrt(2), abs=1e-15)
    assert pt.q == pytest.approx(A / math.sqrt(2), abs=1e-15)
    assert pt.t == pytest.approx(0.70548, abs=1e-5)
    split_db = 10 * math.log10(pt.t ** 2 + pt.q ** 2)
    assert -0.02 - 1e-12 <= split_db <= 0


def test_coupler_lossless_limit():
    pt = coupler_response(1.55, 0.0, CouplerModel(insertion_loss_db=0.0))
    assert pt.t ** 2 + pt.q ** 2 == pytest.approx(1.0, abs=1e-15)


def test_coupler_at_1450():
    pt = coupler_response(1.45, 0.0)
    assert pt.q ** 2 == pytest.approx(A ** 2 * math.sin(0.2 * math.pi) ** 2, rel=1e-13)
    assert pt.q ** 2 / A ** 2 == pytest.approx(0.3454915, abs=1e-7)


def test_coupler_phase():
    pt = coupler_response(1.50, 10.0)
    assert pt.phi == pytest.approx(2 * math.pi / 1.50 * surrogate(0.46, 1.50) * 30.0, rel=1e-13)


@given(wavelengths, st.floats(-20, 20))
def test_coupler_energy(lam, dw):
    lossy = coupler_response(lam, dw)
    assert lossy.t ** 2 + lossy.q ** 2 == pytest.approx(A ** 2, abs=1e-12)
    assert lossy.t ** 2 + lossy.q ** 2 < 1
    ideal = coupler_response(lam, dw, CouplerModel(insertion_loss_db=0.0))
    assert abs(ideal.t ** 2 + ideal.q ** 2 - 1) < 1e-12


@pytest.mark.parametrize("lam, dw", [(1.1, 0), (1.8, 0), (1.55, 25), (1.55, -20.5), (math.nan, 0)])
def test_coupler_domain(lam, dw):
    with pytest.raises(ValueError):
        coupler_response(lam, dw)


def test_table_grid():
    tab = build_coupler_table(0.0)
    assert len(tab.wavelengths) == 1000
    assert tab.wavelengths[0] == 1.2 and tab.wavelengths[-1] == 1.7
    assert np.allclose(np.diff(tab.wavelengths), 0.5 / 999, rtol=0, atol=1e-14)


def test_table_nearest_1550():
    tab = build_coupler_table(0.0)
    i = np.argmin(abs(tab.wavelengths - 1.55))
    direct = coupler_response(tab.wavelengths[i], 0.0)
    assert abs(tab.t[i] - direct.t) < 1e-12 and abs(tab.q[i] - direct.q) < 1e-12


def test_table_deterministic():
    tab = build_coupler_table(10.0)
    fresh = coupler_response(np.linspace(1.2, 1.7, 1000), 10.0)
    assert np.array_equal(tab.t, fresh.t) and np.array_equal(tab.phi, fresh.phi)


def test_interpolation_close_to_direct():
    tab = build_coupler_table(0.0)
    pi = interpolate_coupler(tab, 1.5503)
    pd = coupler_response(1.5503, 0.0)
    assert abs(pi.t - pd.t) < 1e-4 and abs(pi.q - pd.q) < 1e-4


def test_etch_reduces_cross_coupling():
    assert coupler_response(1.55, 20.0).q < coupler_response(1.55, 0.0).q


def test_interpolation_exact_at_nodes():
    tab = build_coupler_table(0.0)
    for i in (0, 1, 417, 998, 999):
        pt = interpolate_coupler(tab, tab.wavelengths[i])
        assert (pt.t, pt.q, pt.phi) == (tab.t[i], tab.q[i], tab.phi[i])


def test_interpolation_midpoint():
    tab = build_coupler_table(0.0)
    i = 500
    mid = 0.5 * (tab.wavelengths[i] + tab.wavelengths[i + 1])
    pt = interpolate_coupler(tab, mid)
    assert pt.t == pytest.approx(0.5 * (tab.t[i] + tab.t[i + 1]), abs=1e-15)
    assert pt.phi == pytest.approx(0.5 * (tab.phi[i] + tab.phi[i + 1]), rel=1e-14)


def test_interpolation_dense_scan():
    tab = build_coupler_table(0.0)
    lam = np.linspace(1.25, 1.65, 10_000)
    pi = interpolate_coupler(tab, lam)
    pd = coupler_response(lam, 0.0)
    assert np.max(abs(pi.t - pd.t)) < 1e-4
    assert np.max(abs(pi.q - pd.q)) < 1e-4
    assert np.max(abs(pi.phi - pd.phi)) < 1e-2


@pytest.mark.parametrize("lam", [1.19, 1.71])
def test_interpolation_out_of_range(lam):
    with pytest.raises(OutOfRangeError):
        interpolate_coupler(build_coupler_table(0.0), lam)


def test_coupler_csv_round_trip(tmp_path):
    tab = build_coupler_table(-10.0)
    path = tmp_path / "dc.csv"
    tab.to_csv(path)
    assert path.read_text().splitlines()[0] == "wavelength_um,t,q,phi_rad"
    back = CouplerSpectrum.from_csv(path, -10.0)
    for name in ("wavelengths", "t", "q", "phi"):
        assert np.array_equal(getattr(back, name), getattr(tab, name))


def test_index_model_defaults():
    m = DEFAULT_INDEX_MODEL
    assert (m.width_range, m.wavelength_range) == ((0.35, 0.60), (1.2, 1.7))


def test_power_preserving_interpolation():
    tab = build_coupler_table(0.0, CouplerModel(insertion_loss_db=0.0))
    lam = np.linspace(1.25, 1.65, 5_001)
    plain = interpolate_coupler(tab, lam)
    kept = interpolate_coupler(tab, lam, preserve_power=True)
    # the chord between nodes loses a little power; the rescaled pair does not
    assert np.max(1 - (plain.t ** 2 + plain.q ** 2)) > 1e-9
    assert np.max(abs(kept.t ** 2 + kept.q ** 2 - 1)) < 1e-14
    assert np.max(abs(kept.t - plain.t)) < 1e-6
    node = interpolate_coupler(tab, tab.wavelengths[300], preserve_power=True)
    assert node.t == pytest.approx(tab.t[300], abs=1e-16)
