"""Time-domain field and temperature dynamics under a laser frequency sweep.

In the dimensionless time ``tau = Omega_c t`` the state ``(x, y, theta)``
with ``alpha = x + i y`` and ``theta = dT`` in K evolves as::

    d alpha / d tau = (-1 + i phi) alpha + 1,   phi = phi_l - Phi(T0 + theta)
    d theta / d tau = eps (mu |alpha|^2 - theta),   eps = 1 / (Omega_c tau_th)

which is a single-pole thermal kernel with static response ``mu |alpha|^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import CavityParams, ResonanceModel, circulating_power, half_linewidth, normalized_slope
from .errors import StiffnessFailure
from .steady import BranchPoint

MARGINAL_TOL = 1e-9
MIN_STEP = 1e-6  # in units of 1/Omega_c


@dataclass(frozen=True)
class FieldState:
    field_re: float
    field_im: float
    temperature_rise: float
    time: float = 0.0

    @property
    def intensity(self) -> float:
        return self.field_re**2 + self.field_im**2


@dataclass(frozen=True)
class FieldRate:
    """Time derivatives of a :class:`FieldState`, per second."""

    field_re: float
    field_im: float
    temperature_rise: float


@dataclass(frozen=True)
class ThermalKernel:
    """Static heating per circulating watt and the single relaxation time."""

    chi_stat: float
    tau_thermal: float = 1e-3

    def __post_init__(self):
        if self.chi_stat < 0:
            raise ValueError("chi_stat must be non-negative")
        if not self.tau_thermal > 0:
            raise ValueError("tau_thermal must be positive")

    def mu(self, power_in: float, params: CavityParams) -> float:
        return self.chi_stat * circulating_power(power_in, params)


@dataclass(frozen=True)
class SweepConfig:
    """Linear laser sweep from ``phi_start`` to ``phi_end``.

    ``scan_rate`` is in half-linewidths per second; its magnitude sets the
    speed and its sign, if given, must agree with the sweep direction.
    """

    phi_start: float
    phi_end: float
    scan_rate: float
    input_power: float
    base_temperature: float
    samples: int = 4000
    settle: float = 10.0  # hold at phi_start, in thermal times
    rtol: float = 1e-8

    def __post_init__(self):
        if self.scan_rate == 0 or not math.isfinite(self.scan_rate):
            raise ValueError("scan_rate must be finite and non-zero")
        if self.input_power < 0:
            raise ValueError("input_power must be non-negative")
        if not self.base_temperature > 0:
            raise ValueError("base_temperature must be positive")
        if self.phi_end == self.phi_start:
            raise ValueError("sweep needs distinct start and end detunings")
        if self.scan_rate < 0 and self.phi_end > self.phi_start:
            raise ValueError("negative scan_rate contradicts an upward sweep")
        if self.samples < 2:
            raise ValueError("need at least two samples")
        if not 0 < self.rtol < 1:
            raise ValueError("rtol must lie in (0, 1)")

    @property
    def direction(self) -> int:
        return 1 if self.phi_end > self.phi_start else -1


@dataclass(frozen=True)
class SweepTrace:
    time: np.ndarray  # s, measured from the start of the scan
    detuning: np.ndarray
    intensity: np.ndarray
    temperature_rise: np.ndarray
    transmission: np.ndarray
    steps: int
    jumps: tuple = ()

    def rows(self):
        return zip(self.time, self.detuning, self.intensity, self.temperature_rise, self.transmission)


def transmission(i_tilde, coupling: float):
    """Taper transmission ``1 - K (2 - K) I`` of a single-port resonator."""
    if not 0 <= coupling <= 1:
        raise ValueError("coupling must lie in [0, 1]")
    i_tilde = np.asarray(i_tilde, dtype=float)
    out = 1.0 - coupling * (2.0 - coupling) * i_tilde
    return out if out.ndim else float(out)


def derivative(state: FieldState, phi_l: float, kernel: ThermalKernel, params: CavityParams,
               model: ResonanceModel, T0: float, input_power: float) -> FieldRate:
    omega_c = 2 * math.pi * half_linewidth(params)
    mu = kernel.mu(input_power, params)
    hw = half_linewidth(params)
    phi = phi_l - model.offset(T0 + state.temperature_rise) / hw
    x, y = state.field_re, state.field_im
    return FieldRate(
        field_re=omega_c * (-x - phi * y + 1.0),
        field_im=omega_c * (phi * x - y),
        temperature_rise=(mu * (x * x + y * y) - state.temperature_rise) / kernel.tau_thermal,
    )


def jacobian(point: BranchPoint, kernel: ThermalKernel, params: CavityParams,
             model: ResonanceModel, T0: float) -> np.ndarray:
    """Analytic Jacobian of ``(x, y, theta)`` in units of ``Omega_c`` at a working point."""
    mu = point.temperature_rise / point.intensity
    T = T0 + point.temperature_rise
    phi = point.detuning - model.offset(T) / half_linewidth(params)
    x, y = 1.0 / (1.0 + phi**2), phi / (1.0 + phi**2)
    dshift = normalized_slope(params, model, T)
    eps = 1.0 / (2 * math.pi * half_linewidth(params) * kernel.tau_thermal)
    return np.array([
        [-1.0, -phi, y * dshift],
        [phi, -1.0, -x * dshift],
        [2 * eps * mu * x, 2 * eps * mu * y, -eps],
    ])


def linear_stability(point: BranchPoint, kernel: ThermalKernel, params: CavityParams,
                     model: ResonanceModel, T0: float, tol: float = MARGINAL_TOL) -> str:
    """``"stable"``, ``"unstable"`` or ``"marginal"`` from the Jacobian eigenvalues."""
    re = np.linalg.eigvals(jacobian(point, kernel, params, model, T0)).real
    if np.any(np.abs(re) < tol):
        return "marginal"
    return "stable" if np.all(re < 0) else "unstable"


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, :1] = [1 / 5]
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
_E = _A[6] - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


@njit(cache=True)
def _rhs(tau, s, out, coeffs, t_min, t_max, t0, inv_hw, mu, eps, phi0, rate, tau_ref):
    T = t0 + s[2]
    if T < t_min:
        T = t_min
    elif T > t_max:
        T = t_max
    nu = 0.0
    for k in range(coeffs.shape[0] - 1, -1, -1):
        nu = nu * T + coeffs[k]
    ramp = tau - tau_ref
    if ramp < 0.0:
        ramp = 0.0
    phi = phi0 + rate * ramp - nu * inv_hw
    x, y = s[0], s[1]
    out[0] = -x - phi * y + 1.0
    out[1] = phi * x - y
    out[2] = eps * (mu * (x * x + y * y) - s[2])


MAX_EVENTS = 256


@njit(cache=True)
def _integrate(s0, tau0, taus, A, E, C, coeffs, t_min, t_max, t0, inv_hw, mu, eps,
               phi0, rate, tau_ref, rtol, atol, h_min, max_steps, lag_tol):
    """Adaptive DP45 from ``tau0`` through every time in ``taus``.

    Steps are cut short to land on sample times. After ``tau_ref`` every
    accepted step also checks the thermal lag ``|I - theta/mu|`` against
    ``lag_tol`` and records its crossings (time, intensity, kind) so jumps
    are resolved at step rather than sample resolution. An onset event
    carries the intensity before the step, a settling event the one after.

    Returns the sampled states, a status (0 ok, 1 step collapse, 2 step
    budget), the time reached, the number of accepted steps and the events.
    """
    n = taus.shape[0]
    out = np.empty((n, 3))
    ev = np.empty((MAX_EVENTS, 3))
    n_ev = 0
    s = s0.copy()
    tau = tau0
    k = np.zeros((7, 3))
    tmp = np.empty(3)
    _rhs(tau, s, k[0], coeffs, t_min, t_max, t0, inv_hw, mu, eps, phi0, rate, tau_ref)
    h = 0.01
    steps = 0
    track = mu > 0.0 and lag_tol > 0.0
    lag = abs(s[0] * s[0] + s[1] * s[1] - s[2] / mu) if track else 0.0
    over = lag > lag_tol
    j = 0
    while j < n and taus[j] <= tau:
        out[j] = s
        j += 1
    while j < n:
        if steps >= max_steps:
            return out, 2, tau, steps, ev[:n_ev]
        target = taus[j]
        hs = h
        landing = False
        if tau + hs >= target:
            hs = target - tau
            landing = True
        for st in range(1, 7):
            for i in range(3):
                acc = 0.0
                for m in range(st):
                    acc += A[st, m] * k[m, i]
                tmp[i] = s[i] + hs * acc
            _rhs(tau + C[st] * hs, tmp, k[st], coeffs, t_min, t_max, t0, inv_hw, mu, eps,
                 phi0, rate, tau_ref)
        # the last stage is evaluated at the 5th order solution (FSAL)
        err = 0.0
        for i in range(3):
            e = 0.0
            for m in range(7):
                e += E[m] * k[m, i]
            sc = atol[i] + rtol * max(abs(s[i]), abs(tmp[i]))
            r = abs(hs * e) / sc
            if r > err:
                err = r
        if err > 1.0:
            h = hs * max(0.2, 0.9 * err ** -0.2)
            if h < h_min:
                return out, 1, tau, steps, ev[:n_ev]
            continue
        tau_old = tau
        i_old = s[0] * s[0] + s[1] * s[1]
        tau = target if landing else tau + hs
        for i in range(3):
            s[i] = tmp[i]
            k[0, i] = k[6, i]
        steps += 1
        if track:
            lag_new = abs(s[0] * s[0] + s[1] * s[1] - s[2] / mu)
            # switch on above lag_tol, off below lag_tol / 2
            level = 0.5 * lag_tol if over else lag_tol
            if (lag_new > level) != over:
                if tau_old >= tau_ref and n_ev < MAX_EVENTS:
                    f = (level - lag) / (lag_new - lag)
                    ev[n_ev, 0] = tau_old + f * (tau - tau_old)
                    ev[n_ev, 1] = i_old if not over else s[0] * s[0] + s[1] * s[1]
                    ev[n_ev, 2] = 0.0 if over else 1.0
                    n_ev += 1
                over = not over
            lag = lag_new
        while j < n and taus[j] <= tau:
            out[j] = s
            j += 1
        fac = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** -0.2)
        if not landing or fac < 1.0:
            h = hs * fac
    return out, 0, tau, steps, ev[:n_ev]


@dataclass(frozen=True)
class SweepJump:
    detuning: float
    from_intensity: float
    to_intensity: float


def _jumps(events, intensity, phi0, rate, tau_ref, merge) -> tuple[SweepJump, ...]:
    """Pair onset/settling events into jumps; re-onsets within ``merge`` extend the previous jump."""
    spans = []  # [t_on, i_from, t_off, i_to]
    for t, i, kind in events:
        if kind == 1.0:
            if spans and spans[-1][2] is not None and t - spans[-1][2] < merge:
                spans[-1][2] = None
            else:
                spans.append([t, i, None, None])
        elif spans:
            spans[-1][2], spans[-1][3] = t, i
    return tuple(
        SweepJump(float(phi0 + rate * (t_on - tau_ref)), float(i_from),
                  float(intensity[-1] if i_to is None else i_to))
        for t_on, i_from, _, i_to in spans
    )


def integrate_sweep(config: SweepConfig, kernel: ThermalKernel, params: CavityParams,
                    model: ResonanceModel, *, atol: float = 1e-12, lag_tol: float = 0.01,
                    max_steps: int = 200_000_000) -> SweepTrace:
    """Integrate a linear detuning sweep starting from an empty cavity.

    The laser is held at ``phi_start`` for ``settle`` thermal times, then
    swept at constant rate. Output is sampled at ``samples`` uniformly spaced
    detunings. A collapse of the adaptive step below ``1e-6 / Omega_c``
    raises :class:`StiffnessFailure`.

    Jumps are the intervals where the temperature lags its static value
    ``mu I`` by more than ``lag_tol`` (in units of ``mu``); each is located
    at the detuning where the lag first exceeds the tolerance.
    """
    hw = half_linewidth(params)
    omega_c = 2 * math.pi * hw
    mu = kernel.mu(config.input_power, params)
    eps = 1.0 / (omega_c * kernel.tau_thermal)
    span = config.phi_end - config.phi_start
    rate = config.direction * abs(config.scan_rate) / omega_c  # half-linewidths per unit tau
    tau_hold = config.settle / eps
    taus = tau_hold + np.linspace(0.0, span / rate, config.samples)
    # the optical decay rate bounds explicit DP45 steps to about 3.3 / Omega_c
    if taus[-1] / 3.3 > max_steps:
        raise StiffnessFailure(
            f"sweep spans {taus[-1]:.3g}/Omega_c and needs more than {max_steps} explicit steps; "
            "use a faster scan or a shorter thermal time")
    coeffs = np.asarray(model.coefficients, dtype=float)
    atol_v = np.array([atol, atol, atol * max(mu, 1e-3)])
    out, status, tau_end, steps, events = _integrate(
        np.zeros(3), 0.0, taus, _A, _E, _C, coeffs, model.t_min, model.t_max,
        float(config.base_temperature), 1.0 / hw, mu, eps, float(config.phi_start), rate,
        tau_hold, config.rtol, atol_v, MIN_STEP, max_steps, lag_tol)
    if status == 1:
        phi = config.phi_start + rate * max(tau_end - tau_hold, 0.0)
        raise StiffnessFailure(f"step size fell below {MIN_STEP:g}/Omega_c at detuning {phi:.6g}")
    if status == 2:
        raise StiffnessFailure(f"step budget of {max_steps} exhausted")
    intensity = out[:, 0] ** 2 + out[:, 1] ** 2
    return SweepTrace(
        time=(taus - tau_hold) / omega_c,
        detuning=config.phi_start + rate * (taus - tau_hold),
        intensity=intensity,
        temperature_rise=out[:, 2].copy(),
        transmission=transmission(intensity, params.coupling),
        steps=int(steps),
        jumps=_jumps(events, intensity, config.phi_start, rate, tau_hold, 10.0 / eps),
    )


def integrate_fixed(state: FieldState, phi_l: float, times, kernel: ThermalKernel,
                    params: CavityParams, model: ResonanceModel, T0: float, input_power: float,
                    rtol: float = 1e-8, atol: float = 1e-12) -> list[FieldState]:
    """Integrate at constant detuning from ``state``; returns the states at ``times`` (s)."""
    hw = half_linewidth(params)
    omega_c = 2 * math.pi * hw
    mu = kernel.mu(input_power, params)
    eps = 1.0 / (omega_c * kernel.tau_thermal)
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or np.any(np.diff(t) < 0) or np.any(t < state.time):
        raise ValueError("sample times must be sorted and not precede the start state")
    s0 = np.array([state.field_re, state.field_im, state.temperature_rise], dtype=float)
    atol_v = np.array([atol, atol, atol * max(mu, 1e-3)])
    out, status, _, _, _ = _integrate(
        s0, state.time * omega_c, t * omega_c, _A, _E, _C,
        np.asarray(model.coefficients, dtype=float), model.t_min, model.t_max, float(T0), 1.0 / hw,
        mu, eps, float(phi_l), 0.0, 0.0, rtol, atol_v, MIN_STEP, 200_000_000, 0.0)
    if status:
        raise StiffnessFailure("integration at fixed detuning failed")
    return [FieldState(float(a), float(b), float(c), float(tt)) for (a, b, c), tt in zip(out, t)]


def state_at(point: BranchPoint, params: CavityParams, model: ResonanceModel, T0: float) -> FieldState:
    """Field and temperature of a static working point (phase taken from ``alpha = 1/(1 - i phi)``)."""
    phi = point.detuning - model.offset(T0 + point.temperature_rise) / half_linewidth(params)
    a = 1.0 / (1.0 - 1j * phi)
    return FieldState(a.real, a.imag, point.temperature_rise)
