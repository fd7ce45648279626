"""CSV and JSON renderings of solver results, with '#' provenance headers."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .dynamics import SweepTrace
from .steady import BranchSet


def fmt(x) -> str:
    return format(float(x), ".12g")


def header(config: dict) -> list[str]:
    return [f"# {k} = {config[k]}" for k in sorted(config)]


def _sign(s: int) -> str:
    return "+" if s > 0 else "-"


def branchset_csv(bs: BranchSet, config: dict | None = None) -> str:
    lines = header(config or {})
    lines += [f"# turning_point phi_l={fmt(tp.detuning)} i_tilde={fmt(tp.intensity)} sign_branch={_sign(tp.sign)}"
              for tp in bs.turning_points or ()]
    lines.append("i_tilde,phi_l,delta_t_kelvin,stable,sign_branch")
    for p in bs.points():
        lines.append(f"{fmt(p.intensity)},{fmt(p.detuning)},{fmt(p.temperature_rise)},"
                     f"{int(bool(p.stable))},{_sign(p.sign)}")
    return "\n".join(lines) + "\n"


def branchset_dict(bs: BranchSet) -> dict:
    branches = {}
    for br in bs.branches:
        branches[_sign(br.sign)] = {
            "i_tilde": br.intensity.tolist(),
            "phi_l": br.detuning.tolist(),
            "delta_t_kelvin": (bs.mu * br.intensity).tolist(),
            "stable": [bool(s) for s in br.stable] if br.stable is not None else None,
        }
    return {
        "mu": bs.mu,
        "base_temperature": bs.base_temperature,
        "turning_points": [{"phi_l": tp.detuning, "i_tilde": tp.intensity, "sign_branch": _sign(tp.sign)}
                           for tp in bs.turning_points or ()],
        "branches": branches,
    }


def regime_csv(finesse, powers, codes, config: dict | None = None) -> str:
    lines = header(config or {})
    lines.append(",".join(["finesse\\power_W"] + [fmt(p) for p in powers]))
    for f, row in zip(finesse, codes):
        lines.append(",".join([fmt(f)] + [str(c) for c in row]))
    return "\n".join(lines) + "\n"


def read_regime_csv(text: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    powers = np.array([float(v) for v in rows[0].split(",")[1:]])
    finesse, codes = [], []
    for ln in rows[1:]:
        cells = ln.split(",")
        finesse.append(float(cells[0]))
        codes.append(cells[1:])
    return np.array(finesse), powers, np.array(codes, dtype=object)


def sweep_csv(trace: SweepTrace, config: dict | None = None) -> str:
    lines = header(config or {})
    lines += [f"# jump phi_l={fmt(j.detuning)} from_i_tilde={fmt(j.from_intensity)} to_i_tilde={fmt(j.to_intensity)}"
              for j in trace.jumps]
    lines.append("time_s,phi_l,i_tilde,delta_t_kelvin,transmission")
    lines += [",".join(fmt(v) for v in row) for row in trace.rows()]
    return "\n".join(lines) + "\n"


Q_COLUMNS = ("temperature_K", "q_inverse", "q_total", "rel_freq_shift")


def q_table_csv(table: dict, config: dict | None = None) -> str:
    lines = header(config or {})
    lines.append(",".join(Q_COLUMNS))
    for row in zip(*(table[c] for c in Q_COLUMNS)):
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def to_json(doc: dict, config: dict | None = None) -> str:
    out = {"config": config or {}}
    out.update(doc)
    return json.dumps(out, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def atomic_write(path, text: str) -> None:
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
