"""Calibration fits: resonance polynomial from (T, frequency) data and static heating from thresholds."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial

from .core import REFERENCE_FREQUENCY, CavityParams, ResonanceModel
from .errors import IllConditioned, InsufficientData, NoInversion

MAX_DEGREE = 7
COND_LIMIT = 1e12


@dataclass(frozen=True)
class CalibrationSeries:
    temperatures: np.ndarray  # K
    offsets: np.ndarray  # Hz from reference_frequency
    source: str = ""
    reference_frequency: float = REFERENCE_FREQUENCY

    def __post_init__(self):
        t = np.asarray(self.temperatures, dtype=float)
        v = np.asarray(self.offsets, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("temperatures and offsets must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValueError("calibration points must be finite")
        if np.any(np.diff(t) <= 0):
            raise ValueError("temperatures must be strictly increasing")
        if len(t) and t[0] <= 0:
            raise ValueError("temperatures must be positive")
        object.__setattr__(self, "temperatures", t)
        object.__setattr__(self, "offsets", v)

    def __len__(self) -> int:
        return len(self.temperatures)


@dataclass(frozen=True)
class FitResult:
    model: ResonanceModel
    residuals: np.ndarray  # Hz, data minus fit
    condition: float  # of the normal equations
    weights: np.ndarray | None = None

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.residuals**2)))


def _huber_weights(r, scale, k=1.345):
    a = np.abs(r) / scale
    return np.where(a <= k, 1.0, k / np.maximum(a, 1e-300))


def fit_resonance(data: CalibrationSeries, degree: int = MAX_DEGREE, robust: bool = False,
                  robust_iterations: int = 20) -> FitResult:
    """Least-squares polynomial ``nu_o(T)`` of the given degree.

    The fit runs in a Chebyshev basis over the data range mapped onto
    ``[-1, 1]`` and is converted to power-basis coefficients at the end. With
    ``robust`` the fit is repeated with Huber weights from a MAD scale
    estimate for a fixed number of iterations.
    """
    if not 2 <= degree <= MAX_DEGREE:
        raise ValueError(f"degree must lie between 2 and {MAX_DEGREE}")
    if len(data) < degree + 1:
        raise InsufficientData(f"{len(data)} points cannot determine a degree-{degree} polynomial")
    t, y = data.temperatures, data.offsets
    domain = [float(t[0]), float(t[-1])]
    x = (2 * t - (domain[0] + domain[1])) / (domain[1] - domain[0])
    V = np.polynomial.chebyshev.chebvander(x, degree)
    cond = float(np.linalg.cond(V)) ** 2
    if not cond <= COND_LIMIT:
        raise IllConditioned(f"normal equations condition {cond:.3g} exceeds {COND_LIMIT:g}")
    w = np.ones_like(y)
    coef = np.linalg.lstsq(V, y, rcond=None)[0]
    if robust:
        for _ in range(robust_iterations):
            r = y - V @ coef
            scale = 1.4826 * np.median(np.abs(r - np.median(r)))
            if scale == 0:
                break
            w = _huber_weights(r, scale)
            sw = np.sqrt(w)
            coef = np.linalg.lstsq(V * sw[:, None], y * sw, rcond=None)[0]
    cheb = Chebyshev(coef, domain=domain)
    power = cheb.convert(kind=Polynomial, domain=[-1, 1], window=[-1, 1])
    coefficients = np.zeros(degree + 1)
    coefficients[: len(power.coef)] = power.coef
    model = ResonanceModel(tuple(coefficients), domain[0], domain[1], data.reference_frequency)
    try:
        model = model.with_inversion()
    except NoInversion:
        pass
    return FitResult(model, y - cheb(t), cond, w if robust else None)


def extract_chi_stat(P_thres: float, params: CavityParams, T0: float, T_star: float) -> float:
    """Static heating ``(T* - T0) pi / (P K F)`` in K/W from the multistability threshold power."""
    if not P_thres > 0:
        raise ValueError("threshold power must be positive")
    if not T_star > T0:
        raise ValueError("inversion temperature must exceed the base temperature")
    if params.coupling == 0:
        raise ValueError("coupling must be non-zero")
    return (T_star - T0) * math.pi / (P_thres * params.coupling * params.finesse)


_REF_LINE = re.compile(r"#\s*reference_frequency_hz\s*[=:]\s*(\S+)")


def read_calibration_csv(path) -> CalibrationSeries:
    """Read ``temperature_K, frequency_offset_hz`` rows.

    ``#`` lines are comments; a ``# reference_frequency_hz = ...`` comment
    sets the reference line the offsets refer to. One header row is
    required. Malformed rows raise ``ValueError`` with the line number.
    """
    temps, offs = [], []
    reference = REFERENCE_FREQUENCY
    header = False
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                m = _REF_LINE.match(text)
                if m:
                    try:
                        reference = float(m.group(1))
                    except ValueError:
                        raise ValueError(f"{path}:{lineno}: bad reference frequency {m.group(1)!r}") from None
                continue
            row = next(csv.reader([text]))
            if not header:
                header = True
                if [c.strip() for c in row] != ["temperature_K", "frequency_offset_hz"]:
                    raise ValueError(f"{path}:{lineno}: expected header 'temperature_K,frequency_offset_hz'")
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                t, v = float(row[0]), float(row[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
            if not (math.isfinite(t) and math.isfinite(v)):
                raise ValueError(f"{path}:{lineno}: non-finite value")
            temps.append(t)
            offs.append(v)
    if not header:
        raise ValueError(f"{path}: missing header row")
    try:
        return CalibrationSeries(np.array(temps), np.array(offs), str(path), reference)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def calibration_csv(data: CalibrationSeries) -> str:
    lines = [f"# source: {data.source}" if data.source else "# source: unspecified",
             f"# reference_frequency_hz = {data.reference_frequency!r}",
             "temperature_K,frequency_offset_hz"]
    lines += [f"{t!r},{v!r}" for t, v in zip(data.temperatures.tolist(), data.offsets.tolist())]
    return "\n".join(lines) + "\n"


def synthetic_calibration(model: ResonanceModel, temperatures, noise: float = 0.0,
                          seed: int | None = None) -> CalibrationSeries:
    """Samples of ``model`` with optional Gaussian noise (Hz rms) from a seeded generator."""
    t = np.asarray(temperatures, dtype=float)
    y = np.asarray(model.offset(t), dtype=float)
    if noise:
        y = y + np.random.default_rng(seed).normal(0.0, noise, size=t.shape)
    return CalibrationSeries(t, y, f"synthetic noise={noise:g} seed={seed}", model.reference_frequency)
