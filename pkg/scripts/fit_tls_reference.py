"""Fit the shipped TLS loss parameters to the reported Q(T) anchors.

Anchors for the 63 MHz radial mode

* loss maximum at 50 K with Q = 500
* Q = 1200 at 5 K

The attempt time (1e-13 s), the barrier width (250 K) and the temperature at
which the tunneling law meets the plateau (3 K at 63 MHz) are fixed by hand;
activation strength, mean barrier and plateau level are solved for.

Run from the repository root::

    python3 scripts/fit_tls_reference.py
"""

import argparse
import json
import math
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from cryocavity.tls import ANCHORED_FIT, TlsModel, q_total

OMEGA = 2 * math.pi * 63e6
T_PEAK, Q_PEAK = 50.0, 500.0
T_PLATEAU, Q_PLATEAU = 5.0, 1200.0
ATTEMPT_TIME = 1e-13
BARRIER_WIDTH = 250.0
CROSSOVER = 3.0
FLOOR = 1e-6

DATA = Path(__file__).resolve().parents[1] / "src" / "cryocavity" / "data"


def build(log_c, v_mean, log_plateau) -> TlsModel:
    plateau = math.exp(log_plateau)
    return TlsModel(
        activation_strength=math.exp(log_c),
        barrier_mean=v_mean,
        barrier_width=BARRIER_WIDTH,
        attempt_time=ATTEMPT_TIME,
        tunneling_strength=plateau * OMEGA / CROSSOVER**3,
        plateau=plateau,
        floor=FLOOR,
        provenance=ANCHORED_FIT,
    )


def loss_peak(tls: TlsModel) -> tuple[float, float]:
    r = minimize_scalar(lambda t: q_total(tls, t, OMEGA), bounds=(10.0, 200.0), method="bounded",
                        options={"xatol": 1e-4})
    return float(r.x), float(r.fun)


def residuals(z):
    tls = build(*z)
    t_peak, q_peak = loss_peak(tls)
    return [
        (t_peak - T_PEAK) / T_PEAK,
        (q_peak - Q_PEAK) / Q_PEAK,
        (q_total(tls, T_PLATEAU, OMEGA) - Q_PLATEAU) / Q_PLATEAU,
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dry-run", action="store_true")
    args = ap.parse_args()
    z0 = [math.log(1e-3), 380.0, math.log(8e-4)]
    sol = least_squares(residuals, z0, x_scale=[1.0, 100.0, 1.0], xtol=1e-12, ftol=1e-12)
    tls = build(*sol.x)
    t_peak, q_peak = loss_peak(tls)
    print(f"peak at {t_peak:.3f} K with Q = {q_peak:.2f}")
    print(f"Q(5 K) = {q_total(tls, 5.0, OMEGA):.2f}")
    print(f"Q(0.6 K, 90 MHz) = {q_total(tls, 0.6, 2 * math.pi * 90e6):.4g}")
    print(json.dumps(tls.to_dict(), indent=2))
    if args.dry_run:
        return
    doc = tls.to_dict()
    doc["description"] = ("stand-in fit: loss maximum Q=500 at 50 K and Q=1200 at 5 K for the 63 MHz mode; "
                          "attempt time, barrier width and tunneling crossover fixed by hand")
    doc["residuals"] = [float(r) for r in np.round(sol.fun, 12)]
    (DATA / "tls_reference.json").write_text(json.dumps(doc, indent=2) + "\n")


if __name__ == "__main__":
    main()
