"""Command-line front end: ``nvpol <command> [-c config.ini] [--set section.key=value]``.

Every run resolves a configuration from built-in defaults, an optional INI
file and command-line overrides (later wins), echoes it to stderr, writes a
CSV table or a ``key=value`` fit report, and prints a one-line summary.

Exit status: 0 success, 1 invalid input, 2 numerical failure, 3 I/O error.
"""
from __future__ import annotations

import argparse
import configparser
import io
import json
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .dipolar import Cylinder, HalfSpace, SampleSpec, Sphere, detection_volume
from .errors import GeometryMismatch, InvalidParameter, NumericalFailure
from .fitting import (fit_buildup, fit_depth_profile, fit_exponential,
                      fit_field_dependence, fit_lorentzian, propagate_uncertainty,
                      read_csv)
from .kinetics import (PRESETS, KineticsParams, buildup_experiment, default_resonance,
                       relaxation_experiment, spectrum)
from .signal import ContrastModel, contrast_vs_depth, crossover_depth
from .spinham import TripletParams, field_sweep, labeled_levels, local_slope

COMMANDS = ("levels", "slopes", "field", "volume", "contrast", "spectrum", "relax",
            "buildup", "fit")
FIT_MODELS = ("lorentzian", "exponential", "buildup", "depth", "field")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

WORKERS_ENV = "NVPOL_WORKERS"

# section -> key -> (default, type, description).  Types: float, int, str,
# "float?" (float or none), "floats" (comma list).
SCHEMA = {
    "run": {
        "seed": (0, int, "seed for synthetic noise and Monte Carlo draws"),
        "model": ("lorentzian", str, f"fit model: {', '.join(FIT_MODELS)}"),
        "kind": ("plus", str, "relaxation interval: plus (MW1 to echo) or zero (laser to MW1)"),
        "noise": (0.0, float, "standard deviation of added Gaussian noise"),
    },
    "physics": {
        "D": (-776.55, float, "zero-field splitting D, MHz (pentacene triplet)"),
        "E": (-669.75, float, "zero-field splitting E, MHz (pentacene triplet)"),
        "gamma_e": (2.80, float, "sample electron gyromagnetic ratio, MHz/G"),
        "B0": (512.0, float, "field magnitude, G (working field of the OIPD runs)"),
        "theta": (8.0, float, "polar field angle in the molecular frame, deg"),
        "phi": (20.0, float, "azimuthal field angle, deg"),
        "rho": (1.62e-3, float, "spin density, nm^-3 (0.1% pentacene in p-terphenyl)"),
        "P": (0.1, float, "sample polarization (fitted value of the depth profile)"),
        "c_dip": (8.35, float, "dipolar coupling constant, G nm^3 (slope-corrected)"),
        "geometry": ("cylinder", str, "sample shape: cylinder, halfspace or sphere"),
        "d": (12.0, float, "sensor standoff, um"),
        "r0": (35.0, float, "cylinder radius, um (pillar radius)"),
        "h": (15.0, float, "cylinder thickness, um (pillar height)"),
        "radius": (1000.0, float, "sphere radius, um"),
        "t_isc": (14.4, float, "intersystem-crossing time, ns"),
        "T_plus": (7.0, float, "ms=+1 lifetime, us"),
        "T_zero": (23.0, float, "ms=0 lifetime, us"),
        "T_minus": (None, "float?", "ms=-1 lifetime, us (none: same as T_plus)"),
        "t_l": (1.5, float, "polarization buildup time, us"),
        "P_sat": (0.19, float, "saturated polarization"),
        "gamma_e_nv": (2.80, float, "sensor gyromagnetic ratio, MHz/G"),
        "T_total": (7.0, float, "phase accumulation time for single contrasts, us"),
        "accumulation": (7.0, float, "effective accumulation time for depth maps, us"),
        "linewidth": (8.0, float, "MW1 response FWHM, MHz"),
    },
    "sequence": {
        "preset": ("oipd", str, f"starting sequence: {', '.join(PRESETS)}"),
        "tau_p": (None, "float?", "laser pulse length, us (1.5)"),
        "tau": (None, "float?", "sensor echo length, us (21.6)"),
        "mw1_duration": (None, "float?", "MW1 pulse length, ns (80)"),
        "mw1_frequency": (None, "float?", "MW1 frequency, MHz (none: on resonance)"),
        "readout_phase": ("", str, "final sensor pulse phase: x or y"),
        "tau_rel_plus": (None, "float?", "MW1 to sensor-pulse delay, us (0)"),
        "tau_rel_zero": (None, "float?", "laser to MW1 delay, us (0)"),
        "mw1_placement": ("", str, "midpoint or pre"),
    },
    "sweep": {
        "start": (None, "float?", "first sweep value (command-specific default)"),
        "stop": (None, "float?", "last sweep value (command-specific default)"),
        "n": (None, "float?", "number of sweep points (command-specific default)"),
        "values": ("", "floats", "explicit comma-separated sweep values; overrides start/stop/n"),
    },
    "fit": {
        "phi": (None, "float?", "fixed azimuth for field fits, deg (none: free)"),
        "n_samples": (0, int, "Monte Carlo draws for depth fits (0: skip)"),
        "sigma_T": (1.0, float, "spread of T_eff in the Monte Carlo, us"),
        "sigma_r0": (5.0, float, "spread of r0 in the Monte Carlo, um"),
        "sigma_h": (3.0, float, "spread of h in the Monte Carlo, um"),
    },
    "io": {
        "input": ("", str, "input CSV for fit"),
        "output": ("", str, "output CSV or report path (empty: stdout)"),
        "report": ("", str, "optional JSON report path"),
        "rel_tol": (1e-10, float, "relative tolerance of detection-volume quadrature"),
        "fraction": (0.8, float, "signal fraction defining the detection volume"),
    },
}

# (start, stop, n) per command when [sweep] leaves them unset
SWEEP_DEFAULTS = {
    "levels": (0.0, 600.0, 601),
    "field": (465.0, 560.0, 20),
    "volume": (0.1, 10.0, 3),
    "contrast": (0.01, 100.0, 41),
    "spectrum": (790.0, 840.0, 101),
    "relax": (0.0, 40.0, 21),
    "buildup": (0.25, 6.0, 24),
}
LOG_SWEEPS = ("volume", "contrast")


class ConfigError(InvalidParameter):
    pass


def _convert(section, key, raw):
    default, kind, _ = SCHEMA[section][key]
    raw = raw.strip()
    try:
        if kind == "float?":
            return None if raw.lower() in ("", "none") else float(raw)
        if kind == "floats":
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r} in [{section}]") from None


def resolve_config(path=None, overrides=()) -> dict:
    """Defaults, then the INI file, then ``section.key=value`` overrides."""
    cfg = {sec: {k: v[0] for k, v in keys.items()} for sec, keys in SCHEMA.items()}
    if path:
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        with open(path) as fh:
            parser.read_file(fh)
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(section, "unknown config section")
            for key, raw in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(key, f"unknown key in [{section}]")
                cfg[section][key] = _convert(section, key, raw)
    for item in overrides:
        name, sep, raw = item.partition("=")
        section, dot, key = name.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(name.strip() or item, "override must look like section.key=value")
        if section not in SCHEMA:
            raise ConfigError(section, "unknown config section")
        if key not in SCHEMA[section]:
            raise ConfigError(key, f"unknown key in [{section}]")
        cfg[section][key] = _convert(section, key, raw)
    return cfg


def format_config(cfg: dict) -> str:
    out = io.StringIO()
    for section, keys in cfg.items():
        out.write(f"[{section}]\n")
        for key, value in keys.items():
            if isinstance(value, tuple):
                value = ",".join(repr(v) for v in value)
            out.write(f"{key} = {'none' if value is None else value}\n")
    return out.getvalue()


# ------------------------------------------------------------ builders

def triplet(cfg) -> TripletParams:
    p = cfg["physics"]
    return TripletParams(D=p["D"], E=p["E"], gamma_e=p["gamma_e"], B0=p["B0"],
                         theta=p["theta"], phi=p["phi"])


def geometry(cfg):
    p = cfg["physics"]
    shape = p["geometry"].lower()
    if shape == "cylinder":
        return Cylinder(r0=p["r0"], h=p["h"], d=p["d"])
    if shape == "halfspace":
        return HalfSpace(d=p["d"])
    if shape == "sphere":
        return Sphere(radius=p["radius"], d=p["d"])
    raise ConfigError("geometry", f"unknown shape {p['geometry']!r}")


def sample(cfg) -> SampleSpec:
    p = cfg["physics"]
    return SampleSpec(rho=p["rho"], P=p["P"], c_dip=p["c_dip"], geometry=geometry(cfg))


def kinetics(cfg) -> KineticsParams:
    p = cfg["physics"]
    return KineticsParams(t_isc=p["t_isc"], T_plus=p["T_plus"], T_zero=p["T_zero"],
                          t_l=p["t_l"], P_sat=p["P_sat"], T_minus=p["T_minus"])


def contrast_model(cfg) -> ContrastModel:
    p = cfg["physics"]
    return ContrastModel(gamma_e_nv=p["gamma_e_nv"], T_total=p["T_total"],
                         accumulation=p["accumulation"])


def sequence(cfg):
    s = cfg["sequence"]
    if s["preset"] not in PRESETS:
        raise ConfigError("preset", f"unknown preset {s['preset']!r}")
    changes = {k: v for k, v in s.items()
               if k != "preset" and v not in (None, "")}
    if s["mw1_frequency"] is None:
        changes["mw1_frequency"] = None
    return PRESETS[s["preset"]].replace(**changes)


def sweep_values(cfg, command) -> np.ndarray:
    sw = cfg["sweep"]
    if sw["values"]:
        return np.array(sw["values"], dtype=float)
    start, stop, n = SWEEP_DEFAULTS[command]
    start = start if sw["start"] is None else sw["start"]
    stop = stop if sw["stop"] is None else sw["stop"]
    n = n if sw["n"] is None else sw["n"]
    if n != int(n) or n < 1:
        raise ConfigError("n", "must be a positive integer")
    n = int(n)
    if command in LOG_SWEEPS:
        if not (start > 0 and stop > 0):
            raise ConfigError("start", "log sweeps need positive bounds")
        return np.geomspace(start, stop, n)
    return np.linspace(start, stop, n)


def workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(WORKERS_ENV, f"not an integer: {raw!r}") from None
    if n < 1:
        raise ConfigError(WORKERS_ENV, "must be at least 1")
    return n


def ordered_map(fn, items):
    """``map`` that may run on a thread pool; results keep input order."""
    items = list(items)
    n = workers()
    if n == 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------ commands
# Each returns (text, summary, result dict for the JSON report).

def cmd_levels(cfg):
    p = triplet(cfg)
    B = sweep_values(cfg, "levels")
    table = field_sweep(p, float(B[0]), float(B[-1]), len(B))
    wp, wm = table.omega_plus, table.omega_minus
    return (table.to_csv(), f"levels: {len(B)} fields from {B[0]:g} to {B[-1]:g} G",
            {"n": len(B), "omega_plus_last": float(wp[-1]), "omega_minus_last": float(wm[-1])})


def cmd_slopes(cfg):
    p = triplet(cfg)
    B = cfg["sweep"]["values"] or (p.B0,)

    def row(b):
        q = p.replace(B0=float(b))
        levels, _ = labeled_levels(q.B0, q.theta, q.phi, q.D, q.E, q.gamma_e)
        return (b, abs(levels[0] - levels[1]), abs(levels[1] - levels[2]),
                local_slope(q, "plus"), local_slope(q, "minus"))

    rows = ordered_map(row, B)
    text = _csv(("B0_G", "omega_plus_MHz", "omega_minus_MHz", "slope_plus_MHz_per_G",
                 "slope_minus_MHz_per_G"), rows)
    last = rows[-1]
    return (text, f"slopes at {last[0]:g} G: plus={last[3]:.4f} minus={last[4]:.4f} MHz/G",
            {"slope_plus": float(last[3]), "slope_minus": float(last[4])})


def cmd_field(cfg):
    p = triplet(cfg)
    B = sweep_values(cfg, "field")
    levels, _ = labeled_levels(B, p.theta, p.phi, p.D, p.E, p.gamma_e)
    wp = np.abs(levels[:, 0] - levels[:, 1])
    wm = np.abs(levels[:, 1] - levels[:, 2])
    x = np.concatenate([B, B])
    y = np.concatenate([wp, wm])
    sigma_v = cfg["run"]["noise"]
    if sigma_v < 0:
        raise ConfigError("noise", "must be non-negative")
    if sigma_v > 0:
        y = y + np.random.default_rng(cfg["run"]["seed"]).normal(0.0, sigma_v, y.shape)
    branch = ["plus"] * len(B) + ["minus"] * len(B)
    rows = [(xi, yi, sigma_v, b) for xi, yi, b in zip(x, y, branch)]
    text = _csv(("x", "y", "sigma", "branch"), rows)
    return (text, f"field: {len(x)} transition frequencies, {len(B)} per branch",
            {"n": len(x)})


def cmd_volume(cfg):
    s = sample(cfg)
    depths = sweep_values(cfg, "volume")
    frac, tol = cfg["io"]["fraction"], cfg["io"]["rel_tol"]

    def row(d):
        hs = s.replace(geometry=HalfSpace(float(d)))
        rp = detection_volume(hs, "mean", frac, tol)
        rf = detection_volume(hs, "variance", frac, tol)
        return (d, rp, rf, rp / rf)

    rows = ordered_map(row, depths)
    text = _csv(("depth_um", "r_p_um", "r_f_um", "ratio"), rows)
    ratios = [r[3] for r in rows]
    return (text, f"volume: r_p/r_f from {min(ratios):.4g} to {max(ratios):.4g}",
            {"ratios": [float(r) for r in ratios]})


def cmd_contrast(cfg):
    s = sample(cfg)
    m = contrast_model(cfg)
    depths = sweep_values(cfg, "contrast")
    P_list = (s.P, 1e-4) if s.P != 1e-4 else (s.P,)
    table = contrast_vs_depth(s, m, depths, P_list)
    result = {}
    try:
        cross = crossover_depth(s, m, abs(s.P)) if s.P else None
        summary = f"contrast: crossover depth at P={s.P:g} is {cross:.4g} um"
        result["crossover_um"] = cross
    except NumericalFailure as exc:
        summary = f"contrast: no crossover ({exc})"
    return table.to_csv(), summary, result


def _synthetic(data, label):
    rows = zip(data.x, data.y, data.sigma)
    return _csv(("x", "y", "sigma"), rows), label


def cmd_spectrum(cfg):
    f = sweep_values(cfg, "spectrum")
    data = spectrum(sequence(cfg), f, cfg["physics"]["linewidth"], cfg["run"]["noise"],
                    cfg["run"]["seed"], s=sample(cfg), k=kinetics(cfg),
                    m=contrast_model(cfg), resonance=_resonance(cfg))
    i = int(np.argmax(np.abs(data.y)))
    text, _ = _synthetic(data, "")
    return (text, f"spectrum: {len(f)} points, peak {data.y[i]:.4g} at {data.x[i]:g} MHz",
            {"peak_MHz": float(data.x[i]), "peak_sc": float(data.y[i])})


def _resonance(cfg):
    p = cfg["physics"]
    keys = ("D", "E", "gamma_e", "B0", "theta", "phi")
    if all(p[k] == SCHEMA["physics"][k][0] for k in keys):
        return default_resonance()
    levels, _ = labeled_levels(p["B0"], p["theta"], p["phi"], p["D"], p["E"], p["gamma_e"])
    return float(abs(levels[0] - levels[1]))


def cmd_relax(cfg):
    kind = cfg["run"]["kind"]
    taus = sweep_values(cfg, "relax")
    if cfg["sequence"]["preset"] == "oipd":
        cfg = {**cfg, "sequence": {**cfg["sequence"], "preset": f"oipd-relax-{kind}"}}
    seq = sequence(cfg)
    data = relaxation_experiment(kind, taus, seq, sample(cfg), kinetics(cfg),
                                 contrast_model(cfg), cfg["run"]["noise"], cfg["run"]["seed"])
    text, _ = _synthetic(data, "")
    return (text, f"relax ({kind}): {len(taus)} intervals up to {taus[-1]:g} us",
            {"n": len(taus)})


def cmd_buildup(cfg):
    taus = sweep_values(cfg, "buildup")
    data = buildup_experiment(taus, sequence(cfg), sample(cfg), kinetics(cfg),
                              contrast_model(cfg), cfg["run"]["noise"], cfg["run"]["seed"])
    text, _ = _synthetic(data, "")
    return (text, f"buildup: {len(taus)} laser lengths up to {taus[-1]:g} us",
            {"n": len(taus)})


def cmd_fit(cfg):
    model = cfg["run"]["model"]
    if model not in FIT_MODELS:
        raise ConfigError("model", f"unknown fit model {model!r}")
    path = cfg["io"]["input"]
    if not path:
        raise ConfigError("input", "fit needs an input CSV")
    data = read_csv(path)
    p = cfg["physics"]
    extra = ""
    if model == "lorentzian":
        fit = fit_lorentzian(data)
        key = "center"
    elif model == "exponential":
        fit = fit_exponential(data)
        key = "decay_time"
    elif model == "buildup":
        fit = fit_buildup(data)
        key = "buildup_time"
    elif model == "field":
        fit = fit_field_dependence(data, None, p["D"], p["E"], p["gamma_e"],
                                   phi=cfg["fit"]["phi"])
        key = "theta"
    else:
        geo = dict(r0=p["r0"], h=p["h"], T_eff=p["accumulation"], c_dip=p["c_dip"],
                   rho=p["rho"], gamma_e=p["gamma_e_nv"])
        fit = fit_depth_profile(data, **geo)
        key = "P"
        n = cfg["fit"]["n_samples"]
        if n:
            unc = propagate_uncertainty(
                data, {"T_eff": cfg["fit"]["sigma_T"], "r0": cfg["fit"]["sigma_r0"],
                       "h": cfg["fit"]["sigma_h"]}, n, cfg["run"]["seed"], **geo)
            extra = unc.report()
    report = fit.report(model) + extra
    value, err = fit.params[key], fit.uncertainties[key]
    summary = f"fit {model}: {key} = {value:.6g} +/- {err:.3g}"
    result = fit.to_dict()
    if extra:
        result["sigma_P"] = float(extra.split("sigma_P=")[1].split("\n")[0])
        summary += f" (total sigma_P {result['sigma_P']:.3g})"
    if not fit.converged:
        raise _NotConverged(report, summary + " [not converged]", result)
    return report, summary, result


class _NotConverged(NumericalFailure):
    def __init__(self, text, summary, result):
        super().__init__(summary)
        self.payload = (text, summary, result)


HANDLERS = {
    "levels": cmd_levels, "slopes": cmd_slopes, "field": cmd_field, "volume": cmd_volume,
    "contrast": cmd_contrast, "spectrum": cmd_spectrum, "relax": cmd_relax,
    "buildup": cmd_buildup, "fit": cmd_fit,
}


# ------------------------------------------------------------ argparse

def _defaults_epilog() -> str:
    lines = ["configuration keys (INI sections, defaults):"]
    for section, keys in SCHEMA.items():
        lines.append(f"  [{section}]")
        for key, (default, _, desc) in keys.items():
            shown = "none" if default is None or default == "" else default
            lines.append(f"    {key} = {shown}  ; {desc}")
    lines.append(f"environment: {WORKERS_ENV} sets the worker count for sweeps")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="INI configuration file")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one configuration value (repeatable)")
    common.add_argument("-o", "--output", help="output path (default stdout)")
    common.add_argument("-i", "--input", help="input CSV (fit)")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--report", help="write a JSON report here")
    common.add_argument("-q", "--quiet", action="store_true",
                        help="do not echo the resolved configuration")

    parser = argparse.ArgumentParser(
        prog="nvpol", description="Triplet spectroscopy, dipolar fields and OIPD "
        "simulation for NV-detected spin polarization.",
        epilog=_defaults_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"nvpol {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)
    helps = {
        "levels": "triplet levels against field",
        "slopes": "transition frequencies and field slopes",
        "field": "transition frequencies for orientation fits",
        "volume": "detection-volume radii against depth",
        "contrast": "polarization and fluctuation contrast against depth",
        "spectrum": "simulated MW1 frequency sweep",
        "relax": "simulated relaxation experiment",
        "buildup": "simulated laser-length experiment",
        "fit": "fit a CSV with one of the models",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name],
                           epilog=_defaults_epilog(),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        if name == "fit":
            p.add_argument("--model", choices=FIT_MODELS, help="fit model")
        if name == "relax":
            p.add_argument("--kind", choices=("plus", "zero"), help="relaxation interval")
    return parser


def _overrides(args) -> list:
    out = list(args.set)
    for flag, key in (("output", "io.output"), ("input", "io.input"), ("seed", "run.seed"),
                      ("report", "io.report"), ("model", "run.model"), ("kind", "run.kind")):
        value = getattr(args, flag, None)
        if value is not None:
            out.append(f"{key}={value}")
    return out


def _write(path, text):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_report(path, command, cfg, summary, result, status):
    doc = {
        "header": {"tool": "nvpol", "version": __version__,
                   "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds")},
        "command": command, "status": status, "summary": summary,
        "config": {s: {k: (list(v) if isinstance(v, tuple) else v) for k, v in keys.items()}
                   for s, keys in cfg.items()},
        "result": result,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def validate(cfg: dict) -> None:
    """Build every parameter object once so a bad value fails before any work."""
    triplet(cfg), sample(cfg), kinetics(cfg), contrast_model(cfg), sequence(cfg)
    if cfg["run"]["noise"] < 0:
        raise ConfigError("noise", "must be non-negative")
    if cfg["run"]["kind"] not in ("plus", "zero"):
        raise ConfigError("kind", "must be 'plus' or 'zero'")
    if cfg["run"]["model"] not in FIT_MODELS:
        raise ConfigError("model", f"unknown fit model {cfg['run']['model']!r}")


def run(command: str, cfg: dict, quiet: bool = False) -> int:
    """Execute one resolved configuration; returns the exit status."""
    if not quiet:
        sys.stderr.write(f"# nvpol {command}\n" + format_config(cfg))
    validate(cfg)
    status = EXIT_OK
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            text, summary, result = HANDLERS[command](cfg)
    except _NotConverged as exc:
        text, summary, result = exc.payload
        status = EXIT_NUMERIC
    _write(cfg["io"]["output"], text)
    if cfg["io"]["report"]:
        _json_report(cfg["io"]["report"], command, cfg, summary, result, status)
    print(summary, file=sys.stderr if not cfg["io"]["output"] else sys.stdout)
    return status


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args.config, _overrides(args))
        return run(args.command, cfg, args.quiet)
    except (InvalidParameter, GeometryMismatch, configparser.Error) as exc:
        print(f"nvpol: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalFailure, np.linalg.LinAlgError) as exc:
        print(f"nvpol: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"nvpol: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
