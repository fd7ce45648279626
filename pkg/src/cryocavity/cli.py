"""Command-line interface: ``cryocavity <subcommand> ...``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    REFERENCE_WAVELENGTH,
    SPEED_OF_LIGHT,
    CavityParams,
    MaterialData,
    ResonanceModel,
    mu_parameter,
    reference_model,
)
from .dynamics import SweepConfig, ThermalKernel, integrate_sweep
from .errors import CryoCavityError, NumericalFailure
from .export import (
    atomic_write,
    branchset_csv,
    branchset_dict,
    fmt,
    header,
    q_table_csv,
    regime_csv,
    sweep_csv,
    to_json,
)
from .fitting import fit_resonance, read_calibration_csv, synthetic_calibration
from .steady import branch_curve, classify_regime, classify_stability, regime_map
from .tls import (
    MechMode,
    TlsModel,
    brownian_rms,
    displacement_spectrum,
    phonon_occupancy,
    q_table,
    q_total,
    reference_tls,
    saturation_displacement,
)
from .units import UnitError, parse_grid, parse_quantity


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _q(unit):
    def conv(text):
        try:
            return parse_quantity(text, unit)
        except UnitError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    conv.__name__ = f"quantity[{unit or '-'}]"
    return conv


def _grid(unit):
    def conv(text):
        try:
            return parse_grid(text, unit)
        except UnitError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    conv.__name__ = f"grid[{unit or '-'}]"
    return conv


def _cavity_args(p):
    g = p.add_argument_group("cavity")
    g.add_argument("--model", type=Path, help="resonance model JSON (default: shipped reference)")
    g.add_argument("--radius", type=_q("m"), default=30e-6)
    g.add_argument("--index", type=float, default=1.44)
    g.add_argument("--finesse", type=float, default=1e5)
    g.add_argument("--coupling", type=float, default=1.0)
    lf = g.add_mutually_exclusive_group()
    lf.add_argument("--wavelength", type=_q("m"), default=None)
    lf.add_argument("--laser-frequency", type=_q("Hz"), default=None)
    g.add_argument("--eta", type=float, default=0.01, help="evanescent fraction")


def _output_args(p, formats=("csv",)):
    p.add_argument("-o", "--output", type=Path, help="output file (default: stdout)")
    if len(formats) > 1:
        p.add_argument("--format", choices=formats, default=formats[0])


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cryocavity", description="Thermo-optical multistability and TLS loss toolkit.")
    ap.add_argument("--version", action="version", version=f"cryocavity {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a resonance polynomial to calibration data")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", type=Path, help="calibration CSV (temperature_K, frequency_offset_hz)")
    src.add_argument("--synthetic", type=int, metavar="N",
                     help="fit N samples of the reference model on its valid range instead")
    p.add_argument("--noise", type=_q("Hz"), default=0.0, help="rms noise added to synthetic samples")
    p.add_argument("--seed", type=int, help="random seed for synthetic noise")
    p.add_argument("--degree", type=int, default=7)
    p.add_argument("--robust", action="store_true", help="Huber-reweighted fit")
    _output_args(p)

    p = sub.add_parser("static", help="steady-state branch set")
    _cavity_args(p)
    _heating_args(p)
    p.add_argument("--t0", type=_q("K"), required=True)
    p.add_argument("--grid", type=_grid(""), default=None, help="intensity grid, e.g. 1e-4:1:4000log")
    _output_args(p, ("csv", "json"))

    p = sub.add_parser("regimes", help="regime map over finesse x power")
    _cavity_args(p)
    p.add_argument("--finesse-grid", type=_grid(""), required=True)
    p.add_argument("--power-grid", type=_grid("W"), required=True)
    p.add_argument("--chi", type=float, required=True, help="static heating chi_stat in K/W")
    p.add_argument("--t0", type=_q("K"), required=True)
    p.add_argument("--grid", type=_grid(""), default=None, help="intensity grid")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    _output_args(p)

    p = sub.add_parser("sweep", help="time-domain laser sweep")
    _cavity_args(p)
    p.add_argument("--power", type=_q("W"), required=True)
    h = p.add_mutually_exclusive_group(required=True)
    h.add_argument("--chi", type=float, help="static heating chi_stat in K/W")
    h.add_argument("--mu", type=_q("K"), help="maximum heating; sets chi_stat from the power")
    p.add_argument("--tau-thermal", type=_q("s"), default=1e-3)
    p.add_argument("--t0", type=_q("K"), required=True)
    p.add_argument("--phi-start", type=float, required=True)
    p.add_argument("--phi-end", type=float, required=True)
    p.add_argument("--scan-rate", type=float, required=True, help="half-linewidths per second")
    p.add_argument("--samples", type=int, default=4000)
    p.add_argument("--settle", type=float, default=10.0, help="initial hold in thermal times")
    p.add_argument("--rtol", type=float, default=1e-8)
    _output_args(p)

    p = sub.add_parser("tls", help="mechanical Q(T) and frequency shift table")
    p.add_argument("--tls-model", type=Path, help="TLS model JSON (default: shipped fit)")
    p.add_argument("--frequency", type=_q("Hz"), default=63e6)
    p.add_argument("--temps", type=_grid("K"), default=parse_grid("1:100:100log", "K"))
    p.add_argument("--t-ref", type=_q("K"), default=1.6)
    _output_args(p, ("csv", "json"))

    p = sub.add_parser("brownian", help="thermal displacement spectrum and occupancy report")
    p.add_argument("--temperature", type=_q("K"), required=True)
    p.add_argument("--frequency", type=_q("Hz"), default=63e6)
    p.add_argument("--mass", type=_q("g"), default=10e-12)
    p.add_argument("--q", type=float, help="mechanical Q (default: shipped TLS fit at this temperature)")
    p.add_argument("--spectrum-grid", type=_grid("Hz"), default=None,
                   help="frequencies (default: 4001 points over +/-50 linewidths)")
    p.add_argument("--j-sat", type=float, default=1e-3, help="TLS saturation intensity in W/m^2")
    _output_args(p, ("csv", "json"))
    return ap


def _heating_args(p):
    h = p.add_argument_group("heating (either --mu, or --power with --chi)")
    h.add_argument("--mu", type=_q("K"))
    h.add_argument("--power", type=_q("W"))
    h.add_argument("--chi", type=float, help="static heating chi_stat in K/W")


def _params(args) -> CavityParams:
    if args.laser_frequency is not None:
        nu = args.laser_frequency
    else:
        nu = SPEED_OF_LIGHT / (args.wavelength if args.wavelength is not None else REFERENCE_WAVELENGTH)
    try:
        return CavityParams(radius=args.radius, index=args.index, finesse=args.finesse,
                            coupling=args.coupling, laser_frequency=nu, evanescent_fraction=args.eta)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _model(args) -> ResonanceModel:
    if args.model is None:
        return reference_model()
    return _load(ResonanceModel.load, args.model)


def _load(loader, path):
    if not Path(path).is_file():
        raise UsageError(f"input file not found: {path}")
    try:
        return loader(path)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def _check_output(args):
    out = getattr(args, "output", None)
    if out is not None and not out.parent.resolve().is_dir():
        raise UsageError(f"output directory does not exist: {out.parent}")


def _cavity_config(params: CavityParams, model_label: str) -> dict:
    return {
        "model": model_label,
        "radius_m": fmt(params.radius),
        "index": fmt(params.index),
        "finesse": fmt(params.finesse),
        "coupling": fmt(params.coupling),
        "laser_frequency_hz": fmt(params.laser_frequency),
        "evanescent_fraction": fmt(params.evanescent_fraction),
    }


def _emit(args, text: str):
    if args.output is None:
        sys.stdout.write(text)
    else:
        atomic_write(args.output, text)


def _config(args, **extra) -> dict:
    cfg = {"command": args.command, "version": __version__}
    cfg.update(extra)
    return cfg


# -- subcommands ---------------------------------------------------------------


def cmd_fit(args):
    if args.synthetic is not None:
        if args.synthetic < args.degree + 1:
            raise UsageError("--synthetic needs at least degree + 1 points")
        if args.noise and args.seed is None:
            raise UsageError("--noise needs an explicit --seed")
        ref = reference_model()
        temps = np.linspace(ref.t_min, ref.t_max, args.synthetic)
        data = synthetic_calibration(ref, temps, args.noise, args.seed)
        label = f"synthetic:{args.synthetic}"
    else:
        data = _load(read_calibration_csv, args.input)
        label = str(args.input)
    if args.degree < 2 or args.degree > 7:
        raise UsageError("--degree must lie between 2 and 7")
    res = fit_resonance(data, args.degree, robust=args.robust)
    doc = res.model.to_dict()
    doc["fit"] = {
        "source": label,
        "degree": args.degree,
        "robust": args.robust,
        "noise_hz": args.noise,
        "seed": args.seed,
        "points": len(data),
        "rms_residual_hz": res.rms,
        "normal_condition": res.condition,
        "version": __version__,
    }
    _emit(args, json.dumps(doc, indent=2) + "\n")


def _mu_from(args, params) -> tuple[float, dict]:
    if args.mu is not None:
        if args.power is not None or args.chi is not None:
            raise UsageError("give either --mu or --power with --chi, not both")
        return args.mu, {"mu_k": fmt(args.mu)}
    if args.power is None or args.chi is None:
        raise UsageError("need --mu, or both --power and --chi")
    try:
        mu = mu_parameter(args.power, params, args.chi)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return mu, {"power_w": fmt(args.power), "chi_stat_k_per_w": fmt(args.chi), "mu_k": fmt(mu)}


def cmd_static(args):
    params = _params(args)
    model = _model(args)
    mu, heat = _mu_from(args, params)
    try:
        bs = classify_stability(branch_curve(model, params, mu, args.t0, grid=args.grid))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    regime = classify_regime(bs)
    cfg = _config(args, **_cavity_config(params, str(args.model or "reference")), **heat,
                  t0_k=fmt(args.t0), grid="default" if args.grid is None else _grid_label(args.grid),
                  regime=regime.name)
    if args.format == "json":
        _emit(args, to_json(branchset_dict(bs), cfg))
    else:
        _emit(args, branchset_csv(bs, cfg))


def cmd_regimes(args):
    params = _params(args)
    model = _model(args)
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    if np.any(args.finesse_grid <= 0):
        raise UsageError("finesse grid must be positive")
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as ex:
            codes = regime_map(model, params, args.t0, args.finesse_grid, args.power_grid, args.chi,
                               grid=args.grid, executor=ex)
    else:
        codes = regime_map(model, params, args.t0, args.finesse_grid, args.power_grid, args.chi, grid=args.grid)
    cfg = _config(args, **_cavity_config(params, str(args.model or "reference")),
                  chi_stat_k_per_w=fmt(args.chi), t0_k=fmt(args.t0),
                  finesse_grid=_grid_label(args.finesse_grid), power_grid_w=_grid_label(args.power_grid),
                  grid="default" if args.grid is None else _grid_label(args.grid))
    cfg.pop("finesse")
    _emit(args, regime_csv(args.finesse_grid, args.power_grid, codes, cfg))


def _grid_label(g) -> str:
    return f"{fmt(g[0])}:{fmt(g[-1])}:{len(g)}"


def cmd_sweep(args):
    params = _params(args)
    model = _model(args)
    try:
        if args.mu is not None:
            circulating = args.power * params.coupling * params.finesse / math.pi
            if circulating <= 0:
                raise UsageError("--mu needs a positive circulating power")
            chi = args.mu / circulating
        else:
            chi = args.chi
        kernel = ThermalKernel(chi, args.tau_thermal)
        cfg_sweep = SweepConfig(args.phi_start, args.phi_end, args.scan_rate, args.power, args.t0,
                                samples=args.samples, settle=args.settle, rtol=args.rtol)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    trace = integrate_sweep(cfg_sweep, kernel, params, model)
    cfg = _config(args, **_cavity_config(params, str(args.model or "reference")),
                  power_w=fmt(args.power), chi_stat_k_per_w=fmt(chi), tau_thermal_s=fmt(args.tau_thermal),
                  t0_k=fmt(args.t0), phi_start=fmt(args.phi_start), phi_end=fmt(args.phi_end),
                  scan_rate_hw_per_s=fmt(args.scan_rate), samples=args.samples, settle=fmt(args.settle),
                  rtol=fmt(args.rtol), steps=trace.steps)
    _emit(args, sweep_csv(trace, cfg))


def _tls(args) -> TlsModel:
    if args.tls_model is None:
        return reference_tls()
    return _load(TlsModel.load, args.tls_model)


def cmd_tls(args):
    tls = _tls(args)
    omega = 2 * math.pi * args.frequency
    table = q_table(tls, args.temps, omega, args.t_ref)
    cfg = _config(args, tls_model=str(args.tls_model or "reference"), provenance=tls.provenance,
                  frequency_hz=fmt(args.frequency), t_ref_k=fmt(args.t_ref), temps_k=_grid_label(args.temps))
    if args.format == "json":
        _emit(args, to_json({"table": {k: v.tolist() for k, v in table.items()}}, cfg))
    else:
        _emit(args, q_table_csv(table, cfg))


def cmd_brownian(args):
    omega = 2 * math.pi * args.frequency
    T = args.temperature
    Q = args.q if args.q is not None else float(q_total(reference_tls(), T, omega))
    try:
        mode = MechMode(args.frequency, args.mass, Q)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    grid = args.spectrum_grid
    if grid is None:
        width = args.frequency / Q
        grid = np.linspace(max(args.frequency - 50 * width, args.frequency * 1e-3), args.frequency + 50 * width, 4001)
    f, S = displacement_spectrum(T, mode, grid)
    report = {
        "rms_m": brownian_rms(T, mode),
        "occupancy_classical": phonon_occupancy(T, omega),
        "occupancy_bose": phonon_occupancy(T, omega, exact=True),
        "quality_factor": Q,
        "saturation_displacement_m": saturation_displacement(args.j_sat, MaterialData.silica(), omega),
        "spectrum_area_m2": float(np.trapezoid(S, f)),
    }
    cfg = _config(args, temperature_k=fmt(T), frequency_hz=fmt(args.frequency), mass_kg=fmt(args.mass),
                  q_source="flag" if args.q is not None else "reference TLS fit", j_sat_w_per_m2=fmt(args.j_sat),
                  spectrum_grid_hz=_grid_label(grid))
    if args.format == "json":
        _emit(args, to_json({"report": report, "spectrum": {"frequency_hz": f, "psd_m2_per_hz": S}}, cfg))
        return
    lines = header(cfg) + [f"# {k} = {fmt(v)}" for k, v in report.items()]
    lines.append("frequency_hz,psd_m2_per_hz")
    lines += [f"{fmt(a)},{fmt(b)}" for a, b in zip(f, S)]
    _emit(args, "\n".join(lines) + "\n")


COMMANDS = {"fit": cmd_fit, "static": cmd_static, "regimes": cmd_regimes, "sweep": cmd_sweep,
            "tls": cmd_tls, "brownian": cmd_brownian}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _check_output(args)
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"cryocavity: numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 2
    except (CryoCavityError, ValueError) as exc:
        print(f"cryocavity: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
