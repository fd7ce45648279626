import math

import numpy as np
import oracles
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import constants
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from cryocavity import (
    MaterialData,
    MechMode,
    TlsModel,
    brownian_rms,
    displacement_spectrum,
    frequency_shift,
    phonon_occupancy,
    q_inverse_activated,
    q_inverse_tunneling,
    q_total,
    saturation_displacement,
)
from cryocavity.tls import ANCHORED_FIT, debye_factor, q_inverse_total, q_table

W63 = 2 * math.pi * 63e6
W90 = 2 * math.pi * 90e6
FM = 1e-15


def loss_peak(tls, omega):
    res = minimize_scalar(lambda T: -q_inverse_total(tls, T, omega), bounds=(10, 150), method="bounded",
                          options={"xatol": 1e-3})
    return res.x, 1 / -res.fun


# -- relaxation loss ----------------------------------------------------------------


def test_debye_factor():
    assert debye_factor(0.0) == 0.5
    x = np.geomspace(1e-8, 1e8, 41)
    assert np.allclose(debye_factor(np.log(x)), x / (1 + x**2), rtol=1e-12)
    assert debye_factor(-800.0) == 0.0  # no overflow


@pytest.mark.parametrize("T", [3.0, 10.0, 30.0, 50.0, 80.0, 150.0])
def test_activated_loss_matches_dense_trapezoid(tls_ref, T):
    # [DERIVED] adaptive quadrature against a 400k-node fixed grid
    assert q_inverse_activated(tls_ref, T, W63) == pytest.approx(oracles.debye_loss_dense(tls_ref, T, W63), rel=1e-4)


def test_activated_loss_vanishes_at_low_frequency(tls_ref):
    vals = [q_inverse_activated(tls_ref, 50.0, w) for w in (1e3, 1e0, 1e-3)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 1e-8


def test_activated_vectorized(tls_ref):
    T = np.array([20.0, 50.0])
    assert np.allclose(q_inverse_activated(tls_ref, T, W63), [q_inverse_activated(tls_ref, t, W63) for t in T])


def test_tunneling_cubic(tls_ref):
    assert q_inverse_tunneling(tls_ref, 3.2, W63) == pytest.approx(8 * q_inverse_tunneling(tls_ref, 1.6, W63), rel=1e-15)


@given(st.floats(0.05, 20.0), st.floats(1e6, 1e10))
def test_tunneling_invariant(T, w):
    from cryocavity import reference_tls

    tls = reference_tls()
    assert q_inverse_tunneling(tls, T, w) * w / T**3 == pytest.approx(tls.tunneling_strength, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 200.0))
def test_total_below_each_channel(T):
    from cryocavity import reference_tls

    tls = reference_tls()
    q = q_total(tls, T, W63)
    tun = q_inverse_tunneling(tls, T, W63)
    assert q <= 1 / q_inverse_activated(tls, T, W63)
    assert q <= 1 / (1 / (1 / tun + 1 / tls.plateau))
    assert q <= 1 / tls.floor


def test_peak_and_plateau(tls_ref):
    # [PAPER] loss maximum of Q ~ 500 near 50 K, Q ~ 1200 at 5 K
    T_peak, Q_peak = loss_peak(tls_ref, W63)
    assert T_peak == pytest.approx(50, abs=10)
    assert Q_peak == pytest.approx(500, rel=0.2)
    assert q_total(tls_ref, 5.0, W63) == pytest.approx(1200, rel=0.2)
    assert q_total(tls_ref, 0.6, W90) > 30_000


def test_q_rises_below_plateau(tls_ref):
    T = np.array([0.3, 0.6, 1.0, 2.0])
    q = q_total(tls_ref, T, W63)
    assert np.all(np.diff(q) < 0)


# -- frequency shift ----------------------------------------------------------------


def test_shift_zero_at_reference(tls_ref):
    assert frequency_shift(tls_ref, 1.6, W63, T_ref=1.6) == 0.0


@pytest.mark.parametrize("T", [5.0, 30.0, 60.0, 120.0])
def test_shift_matches_dense_trapezoid(tls_ref, T):
    want = oracles.shift_dense(tls_ref, T, W63, 1.6)
    assert frequency_shift(tls_ref, T, W63) == pytest.approx(want, rel=1e-4, abs=1e-12)


def test_shift_softens_monotonically(tls_ref):
    T = np.linspace(10, 150, 29)
    s = frequency_shift(tls_ref, T, W63)
    assert np.all(np.diff(s) < 0)


def test_shift_linear_in_strength(tls_ref):
    from dataclasses import replace

    double = replace(tls_ref, activation_strength=2 * tls_ref.activation_strength)
    assert frequency_shift(double, 40.0, W63) == pytest.approx(2 * frequency_shift(tls_ref, 40.0, W63), rel=1e-6)


# -- displacement scales ----------------------------------------------------------


def test_saturation_displacement():
    mat = MaterialData.silica()
    assert saturation_displacement(1e-3, mat, 2 * math.pi * 1e9) / FM == pytest.approx(2.0, abs=0.1)
    assert saturation_displacement(1e-3, mat, W63) / FM == pytest.approx(31, rel=0.02)
    assert saturation_displacement(4e-3, mat, W63) == pytest.approx(2 * saturation_displacement(1e-3, mat, W63))
    with pytest.raises(ValueError):
        saturation_displacement(0.0, mat, W63)


def test_phonon_occupancy():
    assert phonon_occupancy(1.6, W63) == pytest.approx(529, abs=1)
    T1 = constants.hbar * W63 / constants.k
    assert phonon_occupancy(T1, W63, exact=True) == pytest.approx(1 / (math.e - 1), rel=1e-12)
    assert phonon_occupancy(3.2, W63) == pytest.approx(2 * phonon_occupancy(1.6, W63), rel=1e-14)
    # Bose and classical differ by the zero-point half at high occupancy
    assert phonon_occupancy(1.6, W63) - phonon_occupancy(1.6, W63, exact=True) == pytest.approx(0.5, abs=1e-3)


def test_brownian_rms():
    mode = MechMode(63e6, 10e-12)
    assert brownian_rms(1.6, mode) / FM == pytest.approx(3.76, abs=0.01)
    assert brownian_rms(1.6, mode) == pytest.approx(oracles.equipartition_rms(1.6, 10e-12, W63), rel=1e-14)
    assert brownian_rms(6.4, mode) == pytest.approx(2 * brownian_rms(1.6, mode), rel=1e-14)
    assert brownian_rms(1.6, mode) ** 2 * mode.effective_mass * mode.omega**2 == pytest.approx(constants.k * 1.6,
                                                                                               rel=1e-14)


def spectrum_area(T, mode):
    """Integral of S over f by adaptive quadrature, split around the resonance."""
    f0, width = mode.frequency, mode.frequency / mode.quality_factor

    def S(f):
        return displacement_spectrum(T, mode, np.array([f]))[1][0]

    edges = [1e-3 * f0, f0 - 50 * width, f0 - width, f0 + width, f0 + 50 * width, 3 * f0, 300 * f0]
    return sum(quad(S, a, b, epsabs=0, epsrel=1e-10, limit=500)[0] for a, b in zip(edges[:-1], edges[1:]))


@pytest.mark.parametrize("Q", [50.0, 1200.0, 3e4])
def test_spectrum_area_is_variance(Q):
    mode = MechMode(63e6, 10e-12, Q)
    assert spectrum_area(1.6, mode) == pytest.approx(brownian_rms(1.6, mode) ** 2, rel=0.01)


def test_spectrum_peak_and_scaling():
    mode = MechMode(63e6, 10e-12, 1200.0)
    _, S = displacement_spectrum(1.6, mode, [63e6])
    peak = 4 * constants.k * 1.6 * 1200 / (10e-12 * W63**3)
    assert S[0] == pytest.approx(peak, rel=1e-12)
    twice = MechMode(63e6, 10e-12, 2400.0)
    assert displacement_spectrum(1.6, twice, [63e6])[1][0] == pytest.approx(2 * peak, rel=1e-12)
    assert spectrum_area(1.6, twice) == pytest.approx(spectrum_area(1.6, mode), rel=1e-3)
    with pytest.raises(ValueError):
        displacement_spectrum(1.6, MechMode(63e6, 10e-12), [63e6])


def test_mode_validation():
    for args in ((0.0, 1e-12), (1e6, 0.0), (1e6, 1e-12, -5.0)):
        with pytest.raises(ValueError):
            MechMode(*args)


# -- persistence ----------------------------------------------------------------


def test_reference_provenance(tls_ref):
    assert tls_ref.provenance == ANCHORED_FIT


def test_tls_json_round_trip(tls_ref, tmp_path):
    p = tmp_path / "tls.json"
    p.write_text(tls_ref.to_json())
    assert TlsModel.load(p) == tls_ref
    d = tls_ref.to_dict()
    d["schema"] = "nope"
    with pytest.raises(ValueError):
        TlsModel.from_dict(d)


def test_tls_validation(tls_ref):
    from dataclasses import asdict

    for key in ("activation_strength", "barrier_width", "attempt_time", "plateau"):
        d = asdict(tls_ref)
        d[key] = -1.0
        with pytest.raises(ValueError):
            TlsModel(**d)


def test_density_normalized(tls_ref):
    V = np.linspace(-100.0, tls_ref.v_max, 200001)
    assert np.trapezoid(tls_ref.density(V), V) == pytest.approx(1.0, rel=1e-6)
    assert tls_ref.density(-1.0) == 0.0


def test_q_table(tls_ref):
    T = np.array([1.0, 5.0, 50.0])
    tab = q_table(tls_ref, T, W63)
    assert set(tab) == {"temperature_K", "q_inverse", "q_total", "rel_freq_shift"}
    assert np.allclose(tab["q_total"], q_total(tls_ref, T, W63))
    assert np.allclose(tab["q_inverse"] * tab["q_total"], 1.0)
