"""Quantities with SI prefixes and grid specifications for the command line.

Grammar::

    quantity := number [prefix] [unit]
    prefix   := f | p | n | u | µ | m | c | k | M | G | T
    grid     := quantity ":" quantity ":" count ("lin" | "log")

The unit, if written, must be the one the flag expects (``W``, ``m``,
``Hz``, ``g``, ``K``, ``s``). A bare number is in base SI units; masses are
returned in kg. Examples: ``260uW``, ``30um``, ``63MHz``, ``10ng``,
``1uW:1mW:50log``.
"""

from __future__ import annotations

import re

import numpy as np

PREFIXES = {"f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6, "m": 1e-3, "c": 1e-2,
            "k": 1e3, "M": 1e6, "G": 1e9, "T": 1e12}
_NUMBER = re.compile(r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*(.*?)\s*$")
_GRID = re.compile(r"^(.+):(.+):(\d+)(lin|log)$")


class UnitError(ValueError):
    pass


def parse_quantity(text: str, unit: str = "") -> float:
    m = _NUMBER.match(text)
    if not m:
        raise UnitError(f"cannot parse quantity {text!r}")
    value, suffix = float(m.group(1)), m.group(2)
    if unit and suffix.endswith(unit):
        suffix = suffix[: -len(unit)]
    if suffix == "":
        scale = 1.0
    elif suffix in PREFIXES:
        scale = PREFIXES[suffix]
    else:
        raise UnitError(f"unknown unit suffix {m.group(2)!r} in {text!r} (expected {unit or 'a bare number'})")
    if unit == "g":
        scale *= 1e-3  # kg
    return value * scale


def parse_grid(text: str, unit: str = "") -> np.ndarray:
    m = _GRID.match(text.strip())
    if not m:
        raise UnitError(f"grid {text!r} does not match lo:hi:countX with X in {{lin, log}}")
    lo, hi = parse_quantity(m.group(1), unit), parse_quantity(m.group(2), unit)
    n, kind = int(m.group(3)), m.group(4)
    if n < 1:
        raise UnitError("grid count must be at least 1")
    if n == 1:
        if lo != hi:
            raise UnitError("a one-point grid needs lo == hi")
        return np.array([lo])
    if not hi > lo:
        raise UnitError("grid needs hi > lo")
    if kind == "log":
        if lo <= 0:
            raise UnitError("logarithmic grid needs lo > 0")
        return np.geomspace(lo, hi, n)
    return np.linspace(lo, hi, n)
