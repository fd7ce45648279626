"""End-to-end acceptance checks, one test per numbered criterion.

The terminal summary (see conftest) prints one PASS/FAIL line per criterion.
"""

import math
import subprocess
import sys
import time

import numpy as np
import oracles
import pytest
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from cryocavity import (
    CavityParams,
    MaterialData,
    MechMode,
    SweepConfig,
    ThermalKernel,
    branch_curve,
    brownian_rms,
    classify_regime,
    displacement_spectrum,
    extract_chi_stat,
    fit_resonance,
    half_linewidth,
    hysteresis_trace,
    integrate_sweep,
    linear_stability,
    mu_parameter,
    phonon_occupancy,
    q_inverse_tunneling,
    q_total,
    regime_map,
    saturation_displacement,
    steady_states,
    turning_points,
)
from cryocavity.fitting import synthetic_calibration
from cryocavity.steady import Regime, default_phi_range
from cryocavity.tls import q_inverse_total

W63 = 2 * math.pi * 63e6
T_STAR = 13.3


def report(label, **values):
    print(label, " ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in values.items()))


# 1 ---------------------------------------------------------------------------------


@pytest.mark.parametrize("chi", [4.4, 4.5, 4.6])
def test_criterion_01_mu_power_pairing(cavity44k, chi):
    for P, mu in ((13e-6, 0.8), (131e-6, 8.4), (260e-6, 16.7)):
        got = mu_parameter(P, cavity44k, chi)
        report("mu", chi=chi, P=P, got=got, want=mu)
        assert got == pytest.approx(mu, rel=0.10)


# 2 ---------------------------------------------------------------------------------


def test_criterion_02_chi_extraction(cavity44k):
    chi = extract_chi_stat(171e-6, cavity44k, 2.3, T_STAR)
    report("chi", value=chi)
    assert chi == pytest.approx(4.6, abs=0.2)
    mu = mu_parameter(171e-6, cavity44k, chi)
    assert mu == pytest.approx(T_STAR - 2.3, rel=4 * np.finfo(float).eps)


# 3 ---------------------------------------------------------------------------------


def test_criterion_03_bistability_threshold(ref):
    F = np.geomspace(1e3, 1e6, 50)
    P = np.geomspace(1e-6, 1e-3, 50)
    t = time.perf_counter()
    codes = regime_map(ref, CavityParams(radius=30e-6), 4.0, F, P, 4.5)
    elapsed = time.perf_counter() - t
    rows = [a for a in range(len(F)) if any(c != "i" for c in codes[a])]
    boundary = F[rows[0]]
    onset = P[next(b for b in range(len(P)) if codes[rows[0], b] != "i")]
    report("threshold", finesse=float(boundary), onset_power=float(onset), seconds=elapsed)
    assert 1e4 / 1.5 <= boundary <= 1e4 * 1.5
    assert all(c == "i" for c in codes[: rows[0]].ravel())
    assert elapsed < 60


# 4 ---------------------------------------------------------------------------------


def test_criterion_04_multistability_onset(ref):
    four, below = [], []
    for T0 in np.linspace(1.6, 13.0, 15):
        for mu in np.linspace(0.2, 35.0, 60):
            for F in (1e4, 4.4e4, 1e5, 1e6):
                n = len(turning_points(branch_curve(ref, CavityParams(finesse=F), mu, T0, analyze=False)))
                if n == 4:
                    four.append((T0, mu, F))
                    if T0 + mu <= T_STAR:
                        below.append((T0, mu, F))
    report("onset", four_point_cases=len(four), below_inversion=len(below))
    assert four, "no four-turning-point configuration found on the grid"
    assert below == []


# 5 ---------------------------------------------------------------------------------


def test_criterion_05_residual_and_oracle(ref, cavity44k):
    worst = 0.0
    for mu, T0, F in ((16.7, 2.3, 44_000), (8.4, 2.3, 44_000), (23.76, 2.3, 31_000), (3.0, 4.0, 1e5)):
        bs = branch_curve(ref, CavityParams(finesse=F), mu, T0)
        for pt in bs.points():
            lhs = 1.0 + (pt.detuning - bs.problem.shift(pt.intensity)) ** 2
            worst = max(worst, abs(lhs - 1.0 / pt.intensity) * pt.intensity)
    rng = np.random.default_rng(2024)
    mismatched, max_di = 0, 0.0
    for _ in range(200):
        mu = rng.uniform(0.0, 30.0)
        phi = ref.offset(2.3) / half_linewidth(cavity44k) + rng.uniform(-20.0, 20.0)
        got = [p.intensity for p in steady_states(ref, cavity44k, mu, 2.3, phi)]
        want = oracles.static_roots(ref, cavity44k, mu, 2.3, phi, cells=20_000)
        if len(got) != len(want):
            mismatched += 1
            continue
        if got:
            max_di = max(max_di, float(np.max(np.abs(np.subtract(got, want)))))
    report("residual", worst_relative=worst, count_mismatches=mismatched, max_dI=max_di)
    assert worst < 1e-10
    assert mismatched == 0
    assert max_di < 1e-6


# 6 ---------------------------------------------------------------------------------

SWEEPS = {
    "tristable44k": dict(finesse=44_000, mu=16.7, chi=4.5),
    "double31k": dict(finesse=31_000, power=280e-6, chi=8.6),
}


def _sweep_case(ref, name, direction):
    c = SWEEPS[name]
    p = CavityParams(finesse=c["finesse"])
    if "mu" in c:
        power = c["mu"] * math.pi / (c["chi"] * p.finesse * p.coupling)
    else:
        power = c["power"]
    mu = mu_parameter(power, p, c["chi"])
    bs = branch_curve(ref, p, mu, 2.3)
    oc = 2 * math.pi * half_linewidth(p)
    kernel = ThermalKernel(c["chi"], 30.0 / oc)  # slow heating, Omega_c tau_th = 30
    lo, hi = default_phi_range(bs, margin=1.5)
    a, b = (lo, hi) if direction == "up" else (hi, lo)
    cfg = SweepConfig(a, b, 2e-6 * oc, power, 2.3, samples=20_000)
    trace = integrate_sweep(cfg, kernel, p, ref)
    quasi = hysteresis_trace(bs, direction, p.coupling, phi_range=(lo, hi))
    return bs, trace, quasi


@pytest.mark.parametrize("name, direction", [("tristable44k", "up"), ("tristable44k", "down"), ("double31k", "up"),
                                             ("double31k", "down")])
def test_criterion_06_static_dynamic_jumps(ref, name, direction):
    t = time.perf_counter()
    bs, trace, quasi = _sweep_case(ref, name, direction)
    elapsed = time.perf_counter() - t
    tps = np.array([tp.detuning for tp in bs.turning_points])
    dyn = [j.detuning for j in trace.jumps]
    qs = [j.detuning for j in quasi.jumps]
    mismatch = [float(np.min(np.abs(tps - d))) for d in dyn]
    report(f"sweep {name} {direction}", jumps=len(dyn), quasi_static=len(qs),
           worst_offset=max(mismatch, default=0.0), seconds=elapsed)
    assert len(dyn) == len(qs) > 0
    assert np.allclose(sorted(dyn), sorted(qs), atol=0.01)
    assert max(mismatch) < 0.01  # one percent of a half-linewidth
    if name == "double31k":
        assert classify_regime(bs) is Regime.DOUBLE_BISTABLE
        if direction == "down":
            assert len(dyn) == 2
    assert elapsed < 60


# 7 ---------------------------------------------------------------------------------


def test_criterion_07_stability_oracle(ref, cavity44k):
    checked = disagreements = near = 0
    kernel = ThermalKernel(4.5)  # 1 ms thermal response
    for mu, F in ((8.4, 44_000), (16.7, 44_000), (23.76, 31_000)):
        p = CavityParams(finesse=F)
        bs = branch_curve(ref, p, mu, 2.3)
        for pt in bs.points()[::13]:
            if pt.intensity >= 1.0:
                continue
            close = any(tp.sign == pt.sign and abs(pt.intensity - tp.intensity) < 1e-3 * tp.intensity
                        for tp in bs.turning_points)
            label = linear_stability(pt, kernel, p, ref, 2.3)
            agree = label == ("stable" if pt.stable else "unstable")
            if close:
                near += 1
                continue
            checked += 1
            disagreements += not agree
    report("stability", checked=checked, disagreements=disagreements, skipped_near_turning_points=near)
    assert checked >= 100
    assert disagreements == 0


# 8 ---------------------------------------------------------------------------------


def test_criterion_08_tls_anchors(tls_ref):
    res = minimize_scalar(lambda T: -q_inverse_total(tls_ref, T, W63), bounds=(10, 150), method="bounded",
                          options={"xatol": 1e-3})
    T_peak, Q_peak = res.x, -1 / res.fun
    Q5 = q_total(tls_ref, 5.0, W63)
    Q06 = q_total(tls_ref, 0.6, 2 * math.pi * 90e6)
    T = np.geomspace(0.05, 20, 60)
    w = np.geomspace(1e6, 1e10, 7)[:, None]
    inv = q_inverse_tunneling(tls_ref, T[None, :], w) * w / T[None, :] ** 3
    spread = float(np.max(np.abs(inv / tls_ref.tunneling_strength - 1)))
    report("tls", T_peak=T_peak, Q_peak=Q_peak, Q_5K=float(Q5), Q_0p6K_90MHz=float(Q06), cubic_spread=spread)
    assert T_peak == pytest.approx(50, abs=10)
    assert Q_peak == pytest.approx(500, rel=0.2)
    assert Q5 == pytest.approx(1200, rel=0.2)
    assert Q06 > 30_000
    assert spread < 4 * np.finfo(float).eps


# 9 ---------------------------------------------------------------------------------


def test_criterion_09_brownian_thermometry(tls_ref):
    mode = MechMode(63e6, 10e-12, float(q_total(tls_ref, 1.6, W63)))
    rms = brownian_rms(1.6, mode)
    n = phonon_occupancy(1.6, W63)
    f0, width = mode.frequency, mode.frequency / mode.quality_factor
    edges = [1e-3 * f0, f0 - 50 * width, f0 - width, f0 + width, f0 + 50 * width, 3 * f0, 300 * f0]

    def S(f):
        return displacement_spectrum(1.6, mode, np.array([f]))[1][0]

    area = sum(quad(S, a, b, epsabs=0, epsrel=1e-10, limit=500)[0] for a, b in zip(edges[:-1], edges[1:]))
    report("brownian", rms_fm=rms * 1e15, occupancy=n, area_over_rms2=area / rms**2)
    assert rms * 1e15 == pytest.approx(3.76, abs=0.01)  # quoted to one unit in the last digit
    assert rms == pytest.approx(oracles.equipartition_rms(1.6, 10e-12, W63), rel=1e-14)
    assert n == pytest.approx(529, abs=0.5)
    assert n == pytest.approx(600, rel=0.15)
    assert area == pytest.approx(rms**2, rel=0.01)


# 10 --------------------------------------------------------------------------------


def test_criterion_10_saturation_displacement():
    dx = saturation_displacement(1e-3, MaterialData.silica(), 2 * math.pi * 1e9)
    report("saturation", fm=dx * 1e15)
    assert dx * 1e15 == pytest.approx(2.0, abs=0.1)


# 11 --------------------------------------------------------------------------------


def test_criterion_11_fit_recovery(ref):
    temps = np.linspace(ref.t_min, ref.t_max, 20_000)
    errors, rms = [], []
    for seed in range(100):
        res = fit_resonance(synthetic_calibration(ref, temps, noise=1e6, seed=seed))
        errors.append(res.model.inversion_temperature - T_STAR)
        rms.append(res.rms)
    errors = np.array(errors)
    report("fit", max_abs_dT=float(np.max(np.abs(errors))), std_dT=float(np.std(errors)),
           max_rms_hz=float(max(rms)))
    assert np.max(np.abs(errors)) <= 0.2
    assert max(rms) < 3e6


# 12 --------------------------------------------------------------------------------

CLI_RUNS = [
    ["static", "--finesse", "44000", "--power", "260uW", "--chi", "4.5", "--t0", "2.3"],
    ["regimes", "--finesse-grid", "1e3:1e6:8log", "--power-grid", "1uW:1mW:8log", "--chi", "4.5", "--t0", "4",
     "--workers", "2"],
    ["fit", "--synthetic", "500", "--noise", "1MHz", "--seed", "5"],
    ["sweep", "--finesse", "44000", "--power", "131uW", "--chi", "4.5", "--t0", "2.3", "--tau-thermal", "380ns",
     "--phi-start", "-3", "--phi-end", "-1", "--scan-rate", "5e3", "--samples", "200"],
    ["tls", "--temps", "1K:100K:20log"],
    ["brownian", "--temperature", "1.6K"],
]


@pytest.mark.parametrize("argv", CLI_RUNS, ids=[a[0] for a in CLI_RUNS])
def test_criterion_12_determinism(argv, tmp_path):
    outputs = []
    for k in range(2):
        out = tmp_path / f"run{k}.out"
        r = subprocess.run([sys.executable, "-m", "cryocavity.cli", *argv, "-o", str(out)],
                           capture_output=True, text=True, check=False)
        assert r.returncode == 0, r.stderr
        outputs.append(out.read_bytes())
    report(f"determinism {argv[0]}", bytes=len(outputs[0]), identical=outputs[0] == outputs[1])
    assert outputs[0] == outputs[1]
    assert len(outputs[0]) > 0
