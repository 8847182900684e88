"""
Command-line experiment runner.

    kgscatter <subcommand> [--config cfg.json] [--out DIR] [--jobs N] [--seedless]

Subcommands: simulate, resonant, nonresonant, localdecay, oscint, sweep.

Each subcommand reads a JSON config, validates it against a schema, fills in
every default and writes the resolved config (``config.json``) next to its
reports, so that ``--config DIR/config.json`` reproduces the run exactly.
Reports are JSON with sorted keys plus CSV tables and gnuplot scripts; no
timestamps or random numbers enter them, so identical configs give
byte-identical outputs.

Exit codes: 0 success, 2 configuration error, 3 numerical guard tripped.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__
from . import asymptotics as asy
from . import evolution as ev
from . import localdecay as ld
from . import normalform as nfm
from . import oscillatory as osc
from .coefficients import PROFILE_KINDS
from .spectral import SQRT3, ResonanceError, bracket, ft_at, make_grid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GUARD = 3

COMMANDS = ("simulate", "resonant", "nonresonant", "localdecay", "oscint", "sweep")

GUARD_ERRORS = (
    ev.BlowUpError,
    ev.EnergyDriftError,
    ResonanceError,
    osc.ConvergenceError,
    osc.DegenerateHessianError,
    ld.WindowTooLargeError,
    asy.DegenerateWindowError,
    MemoryError,
    FloatingPointError,
)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


# ---------------------------------------------------------------------------
# schemas and defaults
# ---------------------------------------------------------------------------

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NUM_LIST = {"type": "array", "items": _NUM}
_POS_LIST = {"type": "array", "items": _POS, "minItems": 1}
_WINDOW = {"oneOf": [{"type": "null"}, {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2}]}

_PROFILE = {
    "oneOf": [
        {"type": "null"},
        {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": list(PROFILE_KINDS) + ["odd_gaussian", "sech"]},
                "deresonate": {"type": "boolean"},
            },
            "additionalProperties": {"type": ["number", "boolean"]},
        },
    ]
}

SIMULATION_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "L": _POS,
        "N": {"type": "integer", "minimum": 256},
        "alpha": _PROFILE,
        "beta": _PROFILE,
        "beta0": _NUM,
        "u0": _PROFILE,
        "u1": _PROFILE,
        "eps": {"type": "number", "minimum": 0},
        "T": _POS,
        "dt": _POS,
        "checkpoint_ratio": _POS,
        "record_every": {"type": "integer", "minimum": 1},
        "dealias": {"type": "boolean"},
        "rays": _NUM_LIST,
        "track_xi": _NUM_LIST,
        "energy_rtol": _POS,
        "blowup": _POS,
    },
}


def _command_schema(props: dict) -> dict:
    return {"type": "object", "additionalProperties": False, "properties": props}


_TRAJ = {"type": ["string", "null"]}

SCHEMAS = {
    "simulate": _command_schema({"simulation": SIMULATION_SCHEMA}),
    "resonant": _command_schema(
        {
            "simulation": SIMULATION_SCHEMA,
            "trajectory": _TRAJ,
            "fit_window": _WINDOW,
            "origin_window": _WINDOW,
            "vmod_times": _POS_LIST,
            "vmod_refine": {"type": "integer", "minimum": 1},
            "off_ray_speeds": _NUM_LIST,
            "off_ray_times": {"type": "array", "items": _POS, "minItems": 2, "maxItems": 2},
            "off_ray_samples": {"type": "integer", "minimum": 2},
            "extract_V": {"type": "boolean"},
            "V_t_min": _POS,
        }
    ),
    "nonresonant": _command_schema(
        {
            "simulation": SIMULATION_SCHEMA,
            "trajectory": _TRAJ,
            "fit_window": _WINDOW,
            "cauchy_start": {"oneOf": [{"type": "null"}, _POS]},
            "predict_times": _POS_LIST,
            "predict_speeds": _NUM_LIST,
        }
    ),
    "localdecay": _command_schema(
        {
            "variants": {"type": "array", "items": {"enum": list(ld.VARIANTS)}, "minItems": 1},
            "a": {"type": "number", "minimum": 1},
            "b": {"type": "number", "minimum": 0},
            "t_min": _POS,
            "t_max": _POS,
            "n_times": {"type": "integer", "minimum": 2},
            "L": _POS,
            "N": {"type": "integer", "minimum": 256},
            "W": _POS,
        }
    ),
    "oscint": _command_schema(
        {
            "lambdas": _POS_LIST,
            "ppw": _POS,
            "xi": _NUM_LIST,
            "phases": {"type": "array", "items": {"enum": [1, 2, 3, 4]}, "minItems": 1},
        }
    ),
    "sweep": _command_schema(
        {
            "command": {"enum": ["simulate", "resonant", "nonresonant", "localdecay", "oscint"]},
            "base": {"type": "object"},
            "eps": _NUM_LIST,
            "amplitude": _NUM_LIST,
        }
    ),
}

DEFAULTS = {
    "simulate": {"simulation": {}},
    "resonant": {
        "simulation": {},
        "trajectory": None,
        "fit_window": None,
        "origin_window": list(asy.ORIGIN_FIT_WINDOW),
        "vmod_times": [10.0, 100.0, 200.0, 500.0, 1000.0],
        "vmod_refine": 1,
        "off_ray_speeds": [0.5, 0.99],
        "off_ray_times": [10.0, 1000.0],
        "off_ray_samples": 13,
        "extract_V": True,
        "V_t_min": 2.0,
    },
    "nonresonant": {
        "simulation": {
            "alpha": {"kind": "gaussian", "A": 1.0, "sigma": 1.0, "deresonate": True},
            "beta0": 1.0,
            "u0": {"kind": "gaussian", "A": 1.0, "sigma": 1.0},
        },
        "trajectory": None,
        "fit_window": None,
        "cauchy_start": None,
        "predict_times": [250.0, 500.0, 1000.0],
        "predict_speeds": [-0.8, -0.5, 0.0, 0.3, 0.7],
    },
    "localdecay": {
        "variants": list(ld.VARIANTS),
        "a": 2.0,
        "b": 0.0,
        "t_min": 10.0,
        "t_max": 300.0,
        "n_times": 8,
        "L": ld.DEFAULT_L,
        "N": ld.DEFAULT_N,
        "W": ld.DEFAULT_WINDOW,
    },
    "oscint": {
        "lambdas": [25.0, 50.0, 100.0, 200.0, 400.0],
        "ppw": 40.0,
        "xi": [-2.0, 0.0, 1.0, 5.0],
        "phases": [1, 2, 3, 4],
    },
    "sweep": {"command": "simulate", "base": {}, "eps": [], "amplitude": []},
}


def version_stamp() -> dict:
    return {"package": "kgscatter", "version": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def _validate_schema(command: str, cfg: dict) -> None:
    v = jsonschema.Draft202012Validator(SCHEMAS[command])
    errors = sorted(v.iter_errors(cfg), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        lines = [f"  at /{'/'.join(str(p) for p in e.absolute_path)}: {e.message}" for e in errors]
        raise ConfigError(f"invalid {command} config:\n" + "\n".join(lines))


def _resolve_simulation(sim: dict) -> dict:
    """Full SimConfig dict; the simulation is validated here (grid, wrap-around, ranges)."""
    try:
        cfg = ev.SimConfig.from_dict(sim)
        cfg.validate()
        # coefficient presets must build
        cfg.coefficients()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid simulation config: {exc}") from exc
    return json.loads(json.dumps(cfg.to_dict()))


def _check_window(name: str, w, T: float) -> None:
    if w is not None and not (1 <= w[0] < w[1] <= T):
        raise ConfigError(f"{name} {w} must satisfy 1 <= t1 < t2 <= T = {T}")


def resolve_config(command: str, raw: dict | None) -> dict:
    """Validate ``raw`` and return it with every default filled in."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _validate_schema(command, raw)
    cfg = copy.deepcopy(DEFAULTS[command])
    for k, v in raw.items():
        if k == "simulation":
            cfg["simulation"] = {**cfg["simulation"], **v}
        else:
            cfg[k] = v
    if command == "sweep":
        if cfg["command"] == "sweep":
            raise ConfigError("sweeps cannot nest")
        cfg["base"] = resolve_config(cfg["command"], cfg["base"])
        if not cfg["eps"] and not cfg["amplitude"]:
            raise ConfigError("a sweep needs at least one of 'eps' or 'amplitude'")
        for e in cfg["eps"]:
            if not 0 <= e <= 0.5:
                raise ConfigError(f"sweep eps {e} outside [0, 0.5]")
        if cfg["amplitude"] and "simulation" not in cfg["base"]:
            raise ConfigError(f"amplitude sweep needs a simulating command, not {cfg['command']!r}")
        if cfg["eps"] and "simulation" not in cfg["base"]:
            raise ConfigError(f"eps sweep needs a simulating command, not {cfg['command']!r}")
        return cfg
    if "simulation" in cfg:
        if cfg.get("trajectory"):
            path = Path(cfg["trajectory"])
            if not path.exists():
                raise ConfigError(f"trajectory {path} not found")
        cfg["simulation"] = _resolve_simulation(cfg["simulation"])
        T = cfg["simulation"]["T"]
        for key in ("fit_window", "origin_window"):
            if key in cfg:
                _check_window(key, cfg[key], T)
    if command == "localdecay":
        if cfg["t_max"] <= cfg["t_min"]:
            raise ConfigError("t_max must exceed t_min")
        if cfg["L"] < 4 * cfg["t_max"]:
            raise ConfigError(f"L = {cfg['L']} must be at least 4 t_max = {4 * cfg['t_max']}")
        if cfg["W"] > cfg["L"] / 2:
            raise ConfigError("window half-width W must not exceed L/2")
        dx = 2 * cfg["L"] / cfg["N"]
        if 2 * cfg["W"] / dx + 1 > ld.MAX_WINDOW_NODES:
            raise ConfigError(f"window |x| <= {cfg['W']} holds more than {ld.MAX_WINDOW_NODES} nodes at dx = {dx}")
    if command == "resonant":
        T = cfg["simulation"]["T"]
        if any(t > T for t in cfg["vmod_times"]) or cfg["off_ray_times"][1] > T:
            raise ConfigError("v_mod sample times must not exceed T")
    if command == "nonresonant" and any(t > cfg["simulation"]["T"] for t in cfg["predict_times"]):
        raise ConfigError("predict_times must not exceed T")
    return cfg


def load_config(command: str, path) -> dict:
    if path is None:
        return resolve_config(command, {})
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    # a resolved config written by a previous run carries its own stamp
    if isinstance(raw, dict):
        raw.pop("version", None)
        if command != "sweep":
            raw.pop("command", None)
    return resolve_config(command, raw)


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------


def _trajectory(cfg: dict, out: Path | None) -> ev.Trajectory:
    if cfg.get("trajectory"):
        return ev.Trajectory.load(cfg["trajectory"])
    traj = ev.run(ev.SimConfig.from_dict(cfg["simulation"]))
    if out is not None:
        traj.save(out / "trajectory")
    return traj


def _write_common(out: Path, command: str, cfg: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    asy.write_json(out / "config.json", {"command": command, **cfg, "version": version_stamp()})


def _series_csv(out: Path, traj: ev.Trajectory) -> None:
    s = traj.series
    cols = {"t": s["t"], "sup": s["sup"], "energy": s["energy"], "origin": s["origin"]}
    cols.update({k: s[k] for k in sorted(s) if k.startswith("ray_")})
    asy.write_csv(out / "series.csv", cols)
    asy.write_plt(out / "series.plt", "series.csv", "sup-norm decay", 1, {"sup": 2}, logx=True, logy=True, ylabel="sup |v|")


def cmd_simulate(cfg: dict, out: Path, jobs: int = 1) -> dict:
    """Run the solver; write the trajectory directory and the sparse series."""
    traj = ev.run(ev.SimConfig.from_dict(cfg["simulation"]))
    traj.save(out / "trajectory")
    _series_csv(out, traj)
    s = traj.series
    report = {
        "command": "simulate",
        "config": cfg,
        "version": version_stamp(),
        "checkpoints": len(traj.times),
        "final_time": float(traj.times[-1]),
        "final_sup": float(s["sup"][-1]),
        "max_sup": float(np.max(s["sup"])),
        "energy_drift": float(np.max(np.abs(np.asarray(s["energy"]) - s["energy"][0])) / max(abs(s["energy"][0]), 1e-300)),
    }
    asy.write_json(out / "simulate_report.json", report)
    return report


def _resonant_ray(c: float) -> bool:
    return abs(abs(c) - SQRT3 / 2) < 1e-6


def resonant_analysis(traj: ev.Trajectory, cfg: dict, out: Path | None = None) -> dict:
    """a0 (formula and origin fit), origin check, ray fits, v_mod table, V_hat."""
    scfg = traj.config
    alpha = scfg.coefficients(traj.grid)[0]
    T = float(traj.times[-1])
    window = tuple(cfg["fit_window"]) if cfg["fit_window"] else asy.default_window(T)

    A = asy.compute_a0(traj, alpha)
    s = traj.series
    a0_fit = asy.fit_a0_origin(s["t"], s["origin"], tuple(cfg["origin_window"]))
    origin = asy.check_origin(traj, A.value)
    rep = {
        "a0": A.to_dict(),
        "a0_fit": {"value": a0_fit, "window": cfg["origin_window"]},
        "a0_relative_difference": abs(a0_fit - A.value) / abs(A.value) if A.value != 0 else None,
        "origin_error_exponent": origin.exponent,
        "alpha_hat_resonant": {"plus": alpha.r_plus, "minus": alpha.r_minus},
    }

    rays, ray_cols = {}, {}
    for c in scfg.rays:
        t, v = asy.sample_ray(traj, c)
        mod = np.abs(v)
        ray_cols["t"] = t
        ray_cols[f"abs_v_{c:+.4f}"] = mod
        cmp = asy.compare_models(t, mod, window)
        entry = {
            "speed": c,
            "power": cmp["power"].to_dict(),
            "logpower": cmp["logpower"].to_dict(),
            "ratio": cmp["ratio"],
            "log_signature_share": asy.log_signature_share(cmp["logpower"]),
            "log_signature": asy.has_log_signature(cmp["logpower"]),
        }
        if _resonant_ray(c):
            ah = alpha.r_minus if c > 0 else alpha.r_plus
            B_pred = abs(A.value) ** 2 * abs(ah) / math.sqrt(8)
            entry["B_predicted"] = B_pred
            entry["B_relative_error"] = abs(cmp["logpower"].params["B"] - B_pred) / B_pred if B_pred else None
        rays[ev.ray_key(c)] = entry
    rep["rays"] = rays
    rep["fit_window"] = list(window)

    vm = []
    for t in cfg["vmod_times"]:
        q = asy.vmod_quadrature(A.value, alpha, t, SQRT3 / 2 * t, cfg["vmod_refine"])
        f = asy.vmod_ray_formula(A.value, alpha, t, +1) if t > 1 else 0j
        vm.append({"t": t, "quadrature": q, "formula": f, "ratio": abs(q) / abs(f) if f != 0 else None})
    rep["vmod_ray"] = vm

    t_lo, t_hi = cfg["off_ray_times"]
    t_off = np.geomspace(t_lo, t_hi, cfg["off_ray_samples"])
    off = {}
    off_cols = {"t": t_off}
    for c in cfg["off_ray_speeds"]:
        vals = np.array([asy.vmod_off_ray_bound(A.value, alpha, t, c, refine=cfg["vmod_refine"]) for t in t_off])
        off_cols[f"scaled_{c:+.4f}"] = vals
        mn = float(vals.min())
        off[f"{c:+.6f}"] = {"max": float(vals.max()), "min": mn, "max_over_min": float(vals.max() / mn) if mn > 0 else math.inf}
    rep["vmod_off_ray"] = off

    if cfg["extract_V"]:
        V = asy.extract_V(traj, A.value, alpha, t_min=cfg["V_t_min"], refine=cfg["vmod_refine"])
        rep["V"] = {"sup": V.sup(), "cauchy": V.cauchy}
        if out is not None:
            asy.write_csv(out / "V.csv", {"xi": V.xi, "V": V.values})
            asy.write_plt(out / "V.plt", "V.csv", "limit profile |V|", 1, {"Re V": 2, "Im V": 3}, xlabel="xi")

    if out is not None:
        asy.write_csv(out / "rays.csv", ray_cols)
        ycols = {k: i + 2 for i, k in enumerate(k for k in ray_cols if k != "t")}
        asy.write_plt(out / "rays.plt", "rays.csv", "|v| along rays", 1, ycols, logx=True, logy=True)
        asy.write_csv(
            out / "vmod.csv",
            {
                "t": [r["t"] for r in vm],
                "quadrature": np.array([r["quadrature"] for r in vm]),
                "formula": np.array([r["formula"] for r in vm]),
            },
        )
        asy.write_csv(out / "vmod_off_ray.csv", off_cols)
        asy.write_csv(out / "origin.csv", {"t": origin.t, "error": origin.error})
        asy.write_plt(out / "origin.plt", "origin.csv", "origin asymptotics error", 1, {"error": 2}, logx=True, logy=True)
    return rep


def cmd_resonant(cfg: dict, out: Path, jobs: int = 1) -> dict:
    traj = _trajectory(cfg, out)
    report = {"command": "resonant", "config": cfg, "version": version_stamp(), "simulation": traj.config.to_dict()}
    report.update(resonant_analysis(traj, cfg, out))
    asy.write_json(out / "asymptotics_report.json", report)
    return report


def nonresonant_analysis(traj: ev.Trajectory, cfg: dict, out: Path | None = None) -> dict:
    """Normal-form residual, sup-norm decay, integrating phase, W_hat and pointwise prediction."""
    scfg = traj.config
    g = traj.grid
    alpha = scfg.coefficients(g)[0]
    T = float(traj.times[-1])
    window = tuple(cfg["fit_window"]) if cfg["fit_window"] else asy.default_window(T)
    beta0 = float(scfg.beta0)

    nf = nfm.normal_form_coefficients(alpha)
    res = nfm.residual_check(traj, nf, out=out)
    s = traj.series
    sup_fit = asy.fit_decay(s["t"], s["sup"], "power", window)
    rep = {
        "alpha_hat_resonant": {"plus": abs(ft_at(alpha.field, SQRT3)), "minus": abs(ft_at(alpha.field, -SQRT3))},
        "normal_form": {
            "max_residual": res.max_residual,
            "max_v_l2": res.scale,
            "relative": res.max_residual / res.scale if res.scale else 0.0,
            "guard": res.guard,
        },
        "sup_fit": sup_fit.to_dict(),
        "fit_window": list(window),
    }

    start = cfg["cauchy_start"] if cfg["cauchy_start"] else window[0]
    tracked = {}
    for x, d in asy.tracked_profile(traj, beta0).items():
        t, P, B, C = d["t"], d["P"], d["B"], d["corrected"]
        chain_c = asy.dyadic_sup_cauchy(t, C, start)
        chain_r = asy.dyadic_sup_cauchy(t, P, start)
        last_a, last_b = chain_c[-1][0], chain_c[-1][1]
        slope = asy.log_slope(t, B, window)
        pred = 1.5 * beta0 / float(bracket(x)) * abs(C[-1]) ** 2
        tracked[f"{x:.6f}"] = {
            "xi": x,
            "cauchy_corrected": chain_c,
            "cauchy_ratios_corrected": asy.cauchy_ratios(chain_c),
            "cauchy_raw": chain_r,
            "cauchy_ratios_raw": asy.cauchy_ratios(chain_r),
            "phase_drift_last_doubling": asy.phase_drift(t, P, last_a, last_b),
            "B_slope": slope,
            "B_slope_predicted": pred,
            "B_slope_relative_error": abs(slope - pred) / pred if pred else None,
        }
        if out is not None:
            asy.write_csv(out / f"profile_xi{x:+.3f}.csv", {"t": t, "P": P, "B": B, "corrected": C})
    rep["tracked"] = tracked

    W = asy.extract_W(traj, beta0)
    rep["W"] = {"sup": W.sup(), "cauchy": W.cauchy}

    pred_rows = []
    times = np.asarray(traj.times)
    for tq in cfg["predict_times"]:
        i = int(np.argmin(np.abs(times - tq)))
        t = float(times[i])
        x = np.asarray(cfg["predict_speeds"], dtype=float) * t
        vx = asy.evaluate_spectrum(g, traj.vhat(i), x)
        px = asy.predict_pointwise(W, beta0, t, x)
        scale = float(np.max(np.abs(vx))) or 1.0
        pred_rows.append(
            {"t": t, "x": x, "v": vx, "predicted": px, "max_relative_error": float(np.max(np.abs(px - vx)) / scale)}
        )
    rep["prediction"] = pred_rows

    if out is not None:
        asy.write_csv(out / "sup.csv", {"t": s["t"], "sup": s["sup"]})
        asy.write_plt(out / "sup.plt", "sup.csv", "sup-norm decay", 1, {"sup": 2}, logx=True, logy=True)
        asy.write_csv(out / "W.csv", {"xi": W.xi, "W": W.values})
        asy.write_plt(out / "W.plt", "W.csv", "final state W", 1, {"Re W": 2, "Im W": 3}, xlabel="xi")
    return rep


def cmd_nonresonant(cfg: dict, out: Path, jobs: int = 1) -> dict:
    traj = _trajectory(cfg, out)
    report = {"command": "nonresonant", "config": cfg, "version": version_stamp(), "simulation": traj.config.to_dict()}
    report.update(nonresonant_analysis(traj, cfg, out))
    asy.write_json(out / "asymptotics_report.json", report)
    return report


def cmd_localdecay(cfg: dict, out: Path, jobs: int = 1) -> dict:
    grid = make_grid(cfg["L"], cfg["N"])
    t = ld.scan_times(cfg["t_min"], cfg["t_max"], cfg["n_times"])
    scans = {}
    for v in cfg["variants"]:
        sc = ld.decay_scan(v, cfg["a"], cfg["b"], t, grid, W=cfg["W"], jobs=jobs)
        scans[v] = sc.to_dict()
        asy.write_csv(out / f"localdecay_{v}.csv", {"t": sc.t, "norm": sc.norms})
    lines = ["set datafile separator ','", "set logscale xy", "set xlabel 't'", "set ylabel 'operator norm'"]
    plots = [f"'localdecay_{v}.csv' every ::1 using 1:2 with linespoints title '{v}'" for v in cfg["variants"]]
    lines.append("plot " + ", \\\n     ".join(plots))
    (out / "localdecay.plt").write_text("\n".join(lines) + "\n")
    report = {
        "command": "localdecay",
        "config": cfg,
        "version": version_stamp(),
        "scans": scans,
        "exponents": {v: scans[v]["exponent"] for v in scans},
    }
    asy.write_json(out / "localdecay.json", report)
    return report


def oscint_tables(cfg: dict) -> dict:
    """Stationary-phase lambda sweep on the Gaussian test integral and cubic phase data."""
    phase = osc.quadratic_phase()
    F = osc.gaussian_amplitude(1.0)
    chi = osc.BumpCutoff((0.0, 0.0), 2.0)
    rows = []
    for lam in cfg["lambdas"]:
        lead = osc.stationary_phase_2d(phase, F, chi, lam)
        ref = osc.brute_force_2d(phase, F, chi, lam, ppw=cfg["ppw"])
        err = abs(lead - ref)
        rows.append({"lambda": lam, "leading": lead, "brute_force": ref, "error": err, "relative_error": err / abs(ref)})
    lams = np.array([r["lambda"] for r in rows])
    errs = np.array([r["error"] for r in rows])
    slope = float(np.polyfit(np.log(lams), np.log(errs), 1)[0]) if len(rows) >= 2 else None
    cubic = []
    for j in cfg["phases"]:
        for xi in cfg["xi"]:
            try:
                d = osc.cubic_phase_data(j, xi)
            except osc.DegenerateHessianError as exc:
                cubic.append({"phase": j, "xi": xi, "error": str(exc)})
                continue
            cf = osc.cubic_closed_form(j, xi)
            cubic.append(
                {
                    "phase": j,
                    "xi": xi,
                    "point": list(d.point),
                    "value": d.value,
                    "det": d.det,
                    "signature": d.signature,
                    "closed_form": cf,
                    "max_deviation": d.max_deviation(),
                    "derivative_check": d.derivative_check,
                }
            )
    return {"lambda_sweep": rows, "error_exponent": slope, "cubic": cubic}


def cmd_oscint(cfg: dict, out: Path, jobs: int = 1) -> dict:
    tables = oscint_tables(cfg)
    rows = tables["lambda_sweep"]
    asy.write_csv(
        out / "oscint_lambda.csv",
        {
            "lambda": [r["lambda"] for r in rows],
            "leading": np.array([r["leading"] for r in rows]),
            "brute_force": np.array([r["brute_force"] for r in rows]),
            "error": [r["error"] for r in rows],
        },
    )
    asy.write_plt(out / "oscint.plt", "oscint_lambda.csv", "stationary phase error", 1, {"error": 6}, logx=True, logy=True, xlabel="lambda")
    ok = [c for c in tables["cubic"] if "error" not in c]
    asy.write_csv(
        out / "cubic.csv",
        {
            "phase": [c["phase"] for c in ok],
            "xi": [c["xi"] for c in ok],
            "eta": [c["point"][0] for c in ok],
            "sigma": [c["point"][1] for c in ok],
            "value": [c["value"] for c in ok],
            "det": [c["det"] for c in ok],
            "signature": [c["signature"] for c in ok],
            "max_deviation": [c["max_deviation"] for c in ok],
        },
    )
    report = {"command": "oscint", "config": cfg, "version": version_stamp(), **tables}
    asy.write_json(out / "oscint.json", report)
    return report


def sweep_points(cfg: dict) -> list[dict]:
    """Resolved configs of every lattice point (eps x amplitude), in a fixed order."""
    base = cfg["base"]
    eps_list = cfg["eps"] or [None]
    amp_list = cfg["amplitude"] or [None]
    points = []
    for e in eps_list:
        for a in amp_list:
            c = copy.deepcopy(base)
            if e is not None:
                c["simulation"]["eps"] = float(e)
            if a is not None:
                c["simulation"]["alpha"] = {**c["simulation"]["alpha"], "A": float(a)}
            if "trajectory" in c:
                # every lattice point is a fresh simulation
                c["trajectory"] = None
            points.append({"eps": e, "amplitude": a, "config": resolve_config(cfg["command"], c)})
    return points


def _summary(command: str, rep: dict) -> dict:
    if command == "simulate":
        return {"final_sup": rep["final_sup"], "energy_drift": rep["energy_drift"]}
    if command == "resonant":
        rays = {k: {"ratio": r["ratio"], "log_signature": r["log_signature"]} for k, r in rep["rays"].items()}
        return {"a0": rep["a0"]["value"], "a0_fit": rep["a0_fit"]["value"], "rays": rays}
    if command == "nonresonant":
        return {"p": rep["sup_fit"]["params"]["p"], "normal_form_relative": rep["normal_form"]["relative"]}
    if command == "localdecay":
        return {"exponents": rep["exponents"]}
    return {"error_exponent": rep["error_exponent"]}


def _run_point(args) -> dict:
    command, cfg, out = args
    rep = RUNNERS[command](cfg, Path(out), 1)
    return _summary(command, rep)


def cmd_sweep(cfg: dict, out: Path, jobs: int = 1) -> dict:
    """Run one subcommand over the (eps, amplitude) lattice with a bounded worker pool."""
    pts = sweep_points(cfg)
    tasks = []
    for k, p in enumerate(pts):
        d = out / f"point_{k:03d}"
        d.mkdir(parents=True, exist_ok=True)
        _write_common(d, cfg["command"], p["config"])
        tasks.append((cfg["command"], p["config"], str(d)))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            summaries = list(pool.map(_run_point, tasks))
    else:
        summaries = [_run_point(t) for t in tasks]
    rows = [
        {"index": k, "eps": p["eps"], "amplitude": p["amplitude"], "dir": f"point_{k:03d}", "summary": s}
        for k, (p, s) in enumerate(zip(pts, summaries))
    ]
    report = {"command": "sweep", "config": cfg, "version": version_stamp(), "points": rows}
    asy.write_json(out / "sweep_report.json", report)
    return report


RUNNERS = {
    "simulate": cmd_simulate,
    "resonant": cmd_resonant,
    "nonresonant": cmd_nonresonant,
    "localdecay": cmd_localdecay,
    "oscint": cmd_oscint,
    "sweep": cmd_sweep,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kgscatter", description="Klein-Gordon modified-scattering experiments.")
    p.add_argument("--version", action="version", version=f"kgscatter {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "run the solver and store the trajectory",
        "resonant": "resonant-case pipeline: a0, origin check, ray fits, v_mod, V_hat",
        "nonresonant": "non-resonant pipeline: normal form, decay, integrating phase, W_hat",
        "localdecay": "operator-norm decay of weighted propagators",
        "oscint": "stationary phase sweep and cubic phase data",
        "sweep": "run a subcommand over an (eps, amplitude) lattice",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--config", type=Path, default=None, help="JSON config (defaults are filled in)")
        sp.add_argument("--out", type=Path, default=Path("out") / name, help="output directory")
        sp.add_argument("--jobs", type=int, default=1, help="worker count (sweep, localdecay)")
        sp.add_argument(
            "--seedless",
            action="store_true",
            help="document that the run uses no random numbers (all computations are deterministic)",
        )
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.command, args.config)
    except (ConfigError, jsonschema.SchemaError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out
    _write_common(out, args.command, cfg)
    try:
        RUNNERS[args.command](cfg, out, args.jobs)
    except GUARD_ERRORS as exc:
        print(f"numerical guard tripped: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_GUARD
    print(f"wrote {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
