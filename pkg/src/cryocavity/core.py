"""Cavity parameters, the temperature-dependent resonance model and unit helpers.

Optical frequencies are handled as offsets from a reference line (about
193 THz at 1550 nm) so that shifts of a few MHz never have to be recovered
from differences of absolute frequencies.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import constants

from .errors import NoInversion, OutOfTable

SPEED_OF_LIGHT = constants.c
REFERENCE_WAVELENGTH = 1550e-9
REFERENCE_FREQUENCY = SPEED_OF_LIGHT / REFERENCE_WAVELENGTH

RESONANCE_SCHEMA = "cryocavity.resonance-model/1"

# fused silica defaults
SILICA_INDEX = 1.44
SILICA_DENSITY = 2200.0
SILICA_SOUND_SPEED = 5900.0


@dataclass(frozen=True)
class CavityParams:
    """Geometry and optical parameters of a whispering-gallery resonator.

    Attributes:
        radius: major radius of the toroid in m.
        index: refractive index of the guiding material.
        finesse: optical finesse.
        coupling: coupling efficiency K, 1 at impedance matching.
        laser_frequency: absolute laser frequency in Hz.
        evanescent_fraction: fraction of the mode travelling outside the silica.
    """

    radius: float = 30e-6
    index: float = SILICA_INDEX
    finesse: float = 1e5
    coupling: float = 1.0
    laser_frequency: float = REFERENCE_FREQUENCY
    evanescent_fraction: float = 0.01

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if not self.index > 0:
            raise ValueError(f"index must be positive, got {self.index}")
        if not self.finesse > 0:
            raise ValueError(f"finesse must be positive, got {self.finesse}")
        if not 0 <= self.coupling <= 1:
            raise ValueError(f"coupling must lie in [0, 1], got {self.coupling}")
        if not 0 <= self.evanescent_fraction <= 1:
            raise ValueError(
                f"evanescent_fraction must lie in [0, 1], got {self.evanescent_fraction}"
            )

    def with_finesse(self, finesse: float) -> CavityParams:
        return replace(self, finesse=finesse)


def half_linewidth(params: CavityParams) -> float:
    """Cavity half-linewidth ``c / (4 pi n R F)`` in Hz."""
    return SPEED_OF_LIGHT / (4 * math.pi * params.index * params.radius * params.finesse)


def mu_parameter(power_in: float, params: CavityParams, chi_stat: float) -> float:
    """Maximum light-induced temperature rise in K.

    This is the power circulating on resonance, ``P_in K F / pi``, times the
    static heating coefficient ``chi_stat`` (K/W).
    """
    if power_in < 0:
        raise ValueError("input power must be non-negative")
    if chi_stat < 0:
        raise ValueError("chi_stat must be non-negative")
    return circulating_power(power_in, params) * chi_stat


def circulating_power(power_in: float, params: CavityParams) -> float:
    """Intracavity power on resonance, ``P_in K F / pi`` in W."""
    return power_in * params.coupling * params.finesse / math.pi


@dataclass(frozen=True)
class ResonanceModel:
    """Polynomial resonance frequency ``nu_o(T)`` of one optical mode.

    ``coefficients`` are ascending power-basis coefficients in Hz/K^n of the
    frequency offset from ``reference_frequency``. Outside ``[t_min, t_max]``
    the temperature is clamped to the nearest endpoint, so the slope is zero
    there.
    """

    coefficients: tuple[float, ...]
    t_min: float
    t_max: float
    reference_frequency: float = REFERENCE_FREQUENCY
    inversion_temperature: float | None = None
    _slope_coefficients: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if not 1 <= len(coeffs) <= 8:
            raise ValueError("resonance polynomial degree must lie between 0 and 7")
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError("coefficients must be finite")
        if not self.t_max > self.t_min > 0:
            raise ValueError("valid range must satisfy 0 < t_min < t_max")
        object.__setattr__(self, "coefficients", coeffs)
        slope = tuple(k * c for k, c in enumerate(coeffs) if k > 0) or (0.0,)
        object.__setattr__(self, "_slope_coefficients", slope)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def clamp(self, T):
        return np.clip(T, self.t_min, self.t_max)

    def offset(self, T):
        """Frequency offset from the reference line in Hz (clamped)."""
        return _horner(self.coefficients, self.clamp(T))

    def slope(self, T):
        """Analytic ``d nu_o / dT`` in Hz/K; zero outside the valid range."""
        T = np.asarray(T, dtype=float)
        inside = (T >= self.t_min) & (T <= self.t_max)
        value = np.where(inside, _horner(self._slope_coefficients, T), 0.0)
        return value if value.ndim else float(value)

    def absolute(self, T):
        return self.reference_frequency + self.offset(T)

    def with_inversion(self, tol: float = 1e-9) -> ResonanceModel:
        return replace(self, inversion_temperature=inversion_temperature(self, tol=tol))

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema": RESONANCE_SCHEMA,
            "coefficients": list(self.coefficients),
            "t_min": self.t_min,
            "t_max": self.t_max,
            "t_star": self.inversion_temperature,
            "reference_frequency_hz": self.reference_frequency,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ResonanceModel:
        schema = data.get("schema")
        if schema != RESONANCE_SCHEMA:
            raise ValueError(f"unsupported resonance model schema {schema!r}")
        return cls(
            coefficients=tuple(data["coefficients"]),
            t_min=float(data["t_min"]),
            t_max=float(data["t_max"]),
            reference_frequency=float(data.get("reference_frequency_hz", REFERENCE_FREQUENCY)),
            inversion_temperature=data.get("t_star"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> ResonanceModel:
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> ResonanceModel:
        return cls.from_json(Path(path).read_text())


def _horner(coefficients, x):
    x = np.asarray(x, dtype=float)
    acc = np.zeros_like(x)
    for c in reversed(coefficients):
        acc = acc * x + c
    return acc if acc.ndim else float(acc)


def _check_temperature(T):
    T = np.asarray(T, dtype=float)
    if not np.all(np.isfinite(T)):
        raise ValueError("temperature must be finite")
    if np.any(T <= 0):
        raise ValueError("temperature must be positive")
    return T


def eval_resonance(model: ResonanceModel, T):
    """Resonance frequency offset in Hz at temperature ``T`` (K)."""
    _check_temperature(T)
    return model.offset(T)


def resonance_slope(model: ResonanceModel, T):
    """``d nu_o / dT`` in Hz/K at temperature ``T``."""
    _check_temperature(T)
    return model.slope(T)


def inversion_temperature(model: ResonanceModel, tol: float = 1e-3, samples: int = 2001) -> float:
    """Temperature where the resonance slope changes sign.

    The slope is scanned on a dense grid across the valid range; the single
    bracketing cell is refined by bisection until it is narrower than ``tol``.
    """
    grid = np.linspace(model.t_min, model.t_max, samples)
    s = np.sign(model.slope(grid))
    # exact zeros on grid nodes count as a sign change once
    nz = s != 0
    grid, s = grid[nz], s[nz]
    cells = np.flatnonzero(s[:-1] != s[1:])
    if len(cells) == 0:
        raise NoInversion("resonance slope does not change sign in the valid range")
    if len(cells) > 1:
        raise NoInversion(
            f"resonance slope changes sign {len(cells)} times; inversion is ambiguous"
        )
    a, b = grid[cells[0]], grid[cells[0] + 1]
    fa = model.slope(a)
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = model.slope(m)
        if fm == 0:
            return float(m)
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return float(0.5 * (a + b))


def normalized_shift(params: CavityParams, model: ResonanceModel, T):
    """Resonance position ``(4 pi n R F / c) nu_o(T)`` in half-linewidth units."""
    return model.offset(T) / half_linewidth(params)


def normalized_slope(params: CavityParams, model: ResonanceModel, T):
    """Temperature derivative of :func:`normalized_shift` in 1/K."""
    return model.slope(T) / half_linewidth(params)


@dataclass(frozen=True)
class MaterialData:
    """Tabulated and scalar material properties.

    Tables are ``(temperatures, values)`` pairs with strictly increasing
    temperatures and are interpolated linearly.
    """

    expansion: tuple[np.ndarray, np.ndarray]
    external_index_slope: tuple[np.ndarray, np.ndarray] | None = None
    density: float = SILICA_DENSITY
    sound_speed: float = SILICA_SOUND_SPEED

    def __post_init__(self):
        for name in ("expansion", "external_index_slope"):
            table = getattr(self, name)
            if table is None:
                continue
            t, v = (np.asarray(a, dtype=float) for a in table)
            if t.shape != v.shape or t.ndim != 1 or len(t) < 2:
                raise ValueError(f"{name} table must be two equal-length columns")
            if np.any(np.diff(t) <= 0):
                raise ValueError(f"{name} table temperatures must be strictly increasing")
            object.__setattr__(self, name, (t, v))
        if not (self.density > 0 and self.sound_speed > 0):
            raise ValueError("density and sound speed must be positive")

    def expansion_coefficient(self, T):
        return _lookup(self.expansion, T, "expansion coefficient")

    @classmethod
    def silica(cls) -> MaterialData:
        with resources.as_file(resources.files(__package__) / "data" / "silica_expansion.csv") as p:
            table = read_table_csv(p)
        return cls(expansion=table)


def _lookup(table, T, what):
    t, v = table
    T = np.asarray(T, dtype=float)
    if np.any(T < t[0]) or np.any(T > t[-1]):
        raise OutOfTable(f"{what} tabulated on [{t[0]}, {t[-1]}] K only")
    out = np.interp(T, t, v)
    return out if out.ndim else float(out)


def read_table_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a two-column ``temperature_K, value`` CSV with one header row.

    Lines starting with ``#`` are skipped. Malformed rows raise ``ValueError``
    carrying the line number.
    """
    temps, values = [], []
    header_seen = False
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            if not header_seen:
                header_seen = True
                try:
                    float(row[0])
                except ValueError:
                    continue
                raise ValueError(f"{path}:{lineno}: missing header row")
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                t, v = float(row[0]), float(row[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
            if not (math.isfinite(t) and math.isfinite(v)):
                raise ValueError(f"{path}:{lineno}: non-finite value")
            temps.append(t)
            values.append(v)
    if not header_seen:
        raise ValueError(f"{path}: empty table")
    return np.array(temps), np.array(values)


def refractive_contribution(model: ResonanceModel, mat: MaterialData, T):
    """Effective-index slope ``dn_eff/dT = -(1/nu_o) dnu_o/dT - alpha(T)`` in 1/K."""
    T = _check_temperature(T)
    if np.any(T < model.t_min) or np.any(T > model.t_max):
        raise OutOfTable(f"resonance model valid on [{model.t_min}, {model.t_max}] K only")
    alpha = mat.expansion_coefficient(T)
    return -model.slope(T) / model.absolute(T) - alpha


def effective_index(n_silica: float, n_ext: float, evanescent_fraction: float) -> float:
    """Mode-weighted index ``(1 - eta) n_SiO2 + eta n_ext``."""
    return (1 - evanescent_fraction) * n_silica + evanescent_fraction * n_ext


def reference_model() -> ResonanceModel:
    """The shipped resonance model anchored to the published slopes and T*."""
    text = (resources.files(__package__) / "data" / "reference_resonance.json").read_text()
    return ResonanceModel.from_json(text)
