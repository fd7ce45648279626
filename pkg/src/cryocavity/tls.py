"""Mechanical loss and frequency shift from two-level systems in silica.

Thermally activated relaxation uses Debye absorption averaged over a
truncated Gaussian distribution of barrier heights ``V`` (in K) with
Arrhenius times ``tau = tau0 exp(V / T)``::

    Q^-1_act = C_act int P(V) w tau / (1 + w^2 tau^2) dV

Writing ``u = ln(w tau) = ln(w tau0) + V/T`` the Debye factor is
``1 / (2 cosh u)`` and the dispersive factor ``1 / (1 + e^{2u})``, which stay
finite for any barrier.

At low temperature the tunneling law ``Q^-1 = C_tun T^3 / w`` takes over.
Towards higher temperature it levels off at ``plateau``; the two are
combined as ``1 / (1/tun + 1/plateau)`` in :func:`q_total`.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import constants
from scipy.integrate import quad
from scipy.special import expit, ndtr

from .core import MaterialData

TLS_SCHEMA = "cryocavity.tls-model/1"
ANCHORED_FIT = "anchored fit"
USER_SUPPLIED = "user-supplied"

QUAD_EPSREL = 1e-6
SPREAD = 8.0  # integrate barriers up to mean + SPREAD * width


@dataclass(frozen=True)
class TlsModel:
    activation_strength: float
    barrier_mean: float  # K
    barrier_width: float  # K
    attempt_time: float  # s
    tunneling_strength: float
    plateau: float
    floor: float = 1e-6
    provenance: str = USER_SUPPLIED

    def __post_init__(self):
        for name in ("activation_strength", "barrier_mean", "barrier_width", "attempt_time",
                     "tunneling_strength", "plateau"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite")
        if not (math.isfinite(self.floor) and self.floor >= 0):
            raise ValueError("floor must be non-negative")

    @property
    def _norm(self) -> float:
        # Gaussian truncated to V >= 0
        return self.barrier_width * math.sqrt(2 * math.pi) * float(ndtr(self.barrier_mean / self.barrier_width))

    def density(self, V):
        V = np.asarray(V, dtype=float)
        p = np.exp(-0.5 * ((V - self.barrier_mean) / self.barrier_width) ** 2) / self._norm
        return np.where(V >= 0, p, 0.0)

    @property
    def v_max(self) -> float:
        return self.barrier_mean + SPREAD * self.barrier_width

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema"] = TLS_SCHEMA
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> TlsModel:
        if data.get("schema") != TLS_SCHEMA:
            raise ValueError(f"unsupported TLS model schema {data.get('schema')!r}")
        fields = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**fields)

    @classmethod
    def load(cls, path) -> TlsModel:
        return cls.from_dict(json.loads(Path(path).read_text()))


def reference_tls() -> TlsModel:
    """Shipped parameters, fitted to the loss peak and plateau anchors."""
    text = (resources.files(__package__) / "data" / "tls_reference.json").read_text()
    return TlsModel.from_dict(json.loads(text))


@dataclass(frozen=True)
class MechMode:
    frequency: float  # Hz
    effective_mass: float  # kg
    quality_factor: float | None = None

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError("frequency must be positive")
        if not self.effective_mass > 0:
            raise ValueError("effective mass must be positive")
        if self.quality_factor is not None and not self.quality_factor > 0:
            raise ValueError("quality factor must be positive")

    @property
    def omega(self) -> float:
        return 2 * math.pi * self.frequency


def _check_positive(**values):
    for name, v in values.items():
        if not (np.all(np.isfinite(v)) and np.all(np.asarray(v) > 0)):
            raise ValueError(f"{name} must be positive and finite")


def debye_factor(u):
    """``w tau / (1 + w^2 tau^2)`` as a function of ``u = ln(w tau)``."""
    a = np.exp(-np.abs(u))
    return a / (1.0 + a * a)


def _barrier_integral(tls: TlsModel, T: float, omega: float, kernel) -> float:
    log_wt0 = math.log(omega * tls.attempt_time)
    v_res = -T * log_wt0  # barrier with w tau = 1
    hi = tls.v_max
    points = [v_res] if 0 < v_res < hi else None

    def f(V):
        return tls.density(V) * kernel(log_wt0 + V / T)

    val, _ = quad(f, 0.0, hi, points=points, epsrel=QUAD_EPSREL, epsabs=0.0, limit=400)
    return val


def _vectorize(fn, T, omega):
    T = np.asarray(T, dtype=float)
    out = np.vectorize(fn, otypes=[float])(T, omega)
    return out if out.ndim else float(out)


def q_inverse_activated(tls: TlsModel, T, omega: float):
    """Thermally activated relaxation loss ``Q^-1``."""
    _check_positive(T=T, omega=omega)
    return _vectorize(lambda t, w: tls.activation_strength * _barrier_integral(tls, t, w, debye_factor), T, omega)


def q_inverse_tunneling(tls: TlsModel, T, omega: float):
    """Low-temperature tunneling loss ``C_tun T^3 / w``."""
    _check_positive(T=T, omega=omega)
    return tls.tunneling_strength * np.asarray(T, dtype=float) ** 3 / omega


def q_inverse_total(tls: TlsModel, T, omega: float):
    tun = q_inverse_tunneling(tls, T, omega)
    saturated = 1.0 / (1.0 / tun + 1.0 / tls.plateau)
    return q_inverse_activated(tls, T, omega) + saturated + tls.floor


def q_total(tls: TlsModel, T, omega: float):
    """Mechanical quality factor from the sum of all loss channels."""
    return 1.0 / q_inverse_total(tls, T, omega)


def _dispersion(u):
    # 1 / (1 + w^2 tau^2)
    return expit(-2.0 * u)


def frequency_shift(tls: TlsModel, T, omega: float, T_ref: float = 1.6):
    """Relative frequency shift ``dW/W(T) - dW/W(T_ref)`` of the relaxation model."""
    _check_positive(T=T, omega=omega, T_ref=T_ref)

    def one(t, w):
        if t == T_ref:
            return 0.0
        a = _barrier_integral(tls, t, w, _dispersion)
        b = _barrier_integral(tls, T_ref, w, _dispersion)
        return -0.5 * tls.activation_strength * (a - b)

    return _vectorize(one, T, omega)


def saturation_displacement(J_sat: float, mat: MaterialData, omega: float) -> float:
    """Displacement ``sqrt(2 J / (rho c_s w^2))`` that saturates the acoustic TLS (m)."""
    _check_positive(J_sat=J_sat, omega=omega)
    return math.sqrt(2 * J_sat / (mat.density * mat.sound_speed * omega**2))


def phonon_occupancy(T, omega: float, exact: bool = False):
    """Thermal phonon number, ``kT / hbar w`` or the Bose form if ``exact``."""
    _check_positive(T=T, omega=omega)
    x = constants.hbar * omega / (constants.k * np.asarray(T, dtype=float))
    out = 1.0 / np.expm1(x) if exact else 1.0 / x
    return out if np.ndim(out) else float(out)


def brownian_rms(T, mode: MechMode):
    """Equipartition amplitude ``sqrt(kT / (m w^2))`` in m."""
    _check_positive(T=T)
    out = np.sqrt(constants.k * np.asarray(T, dtype=float) / (mode.effective_mass * mode.omega**2))
    return out if out.ndim else float(out)


def displacement_spectrum(T: float, mode: MechMode, frequency_grid) -> tuple[np.ndarray, np.ndarray]:
    """One-sided thermal displacement spectrum ``S_x`` in m^2/Hz on a grid in Hz.

    Normalized so that ``int S_x df`` over all frequencies is the
    equipartition variance.
    """
    if mode.quality_factor is None:
        raise ValueError("displacement spectrum needs the mode quality factor")
    _check_positive(T=T)
    f = np.asarray(frequency_grid, dtype=float)
    _check_positive(frequency_grid=f)
    w, wm, Q = 2 * math.pi * f, mode.omega, mode.quality_factor
    S = 4 * constants.k * T * wm / (mode.effective_mass * Q * ((w**2 - wm**2) ** 2 + (w * wm / Q) ** 2))
    return f, S


def q_table(tls: TlsModel, temperatures, omega: float, T_ref: float = 1.6) -> dict[str, np.ndarray]:
    T = np.asarray(temperatures, dtype=float)
    qi = np.atleast_1d(q_inverse_total(tls, T, omega))
    return {
        "temperature_K": T,
        "q_inverse": qi,
        "q_total": 1.0 / qi,
        "rel_freq_shift": np.atleast_1d(frequency_shift(tls, T, omega, T_ref)),
    }
