"""Command-line front end: argument handling, config files, deterministic
sweeps, and serialization of every module's results.

Setting precedence is flags > config file > built-in default. Config files
are flat ``dotted.key = value`` text; JSON is accepted as an alternative,
and the manifest written by an earlier run can be passed straight back in
as the config to reproduce that run. Floats are printed with 17 significant
digits so every file round-trips. Exit codes: 0 success, 2 invalid input,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from ._bits import derive_seed, is_power_of_two, popcount
from .errors import NumericalError, Pwr2LabError, ValidationError
from .graph import (
    SpinConfiguration,
    build_pwr2_couplings,
    euclidean_afm,
    monna_mapped_afm,
    recursive_ground_state,
)
from .classical import analytic_gap, classical_energy, enumerate_spectrum
from .mcmc import McmcPlan, estimate_low_spectrum
from .lid import mean_lid
from .quantum import (
    build_hamiltonian,
    connected_structure_factor,
    correlation_matrix,
    entropy_profile,
    ground_with_gap,
    second_moment_xi,
    z2_symmetric_ground,
)
from .fss import (
    estimate_pair,
    extrapolate_exponent,
    leave_one_out_systematics,
    load_curve,
    phi_curve,
    save_curve,
)
from .rydgeo import rydberg_couplings, s_of_h, tambourine_positions

MANIFEST_SCHEMA_VERSION = 1
MAX_SWEEP_POINTS = 4096
AXIS_NAMES = ("s", "h", "b_field", "n")
SWEEPABLE = ("classical-gap", "enumerate", "mcmc", "lid", "ed", "map-s-of-h")

# dotted config key -> (flag, kind, default); kind drives coercion of file
# values, flag values are typed by argparse itself
OPT_DEFS = {
    "model.n": ("--n", "int", None),
    "model.s": ("--s", "float", None),
    "model.h": ("--h", "float", None),
    "model.b_field": ("--b-field", "float", 0.0),
    "model.j": ("--j", "float", 1.0),
    "grid.s": ("--s-grid", "str", None),
    "grid.h": ("--h-grid", "str", None),
    "grid.control": ("--grid", "str", None),
    "plan.beta": ("--beta", "float", None),
    "plan.sweeps": ("--sweeps", "int", None),
    "plan.chains": ("--chains", "int", 32),
    "plan.burn_in": ("--burn-in", "float", 0.1),
    "plan.init": ("--init", "str", "random"),
    "plan.k": ("--k", "int", None),
    "plan.max_levels": ("--max-levels", "int", None),
    "plan.ordering": ("--ordering", "str", "euclidean"),
    "plan.tol": ("--tol", "float", 1e-8),
    "fss.generate": ("--generate", "bool", False),
    "fss.family": ("--family", "str", "pwr2-s"),
    "fss.curves": ("--curves", "list", None),
    "fss.x_win": ("--x-win", "float", 0.5),
    "fss.nu_guess": ("--nu-guess", "float", 1.0),
    "sweep.command": ("--command", "str", None),
    "sweep.axis1": ("--axis1", "str", None),
    "sweep.axis2": ("--axis2", "str", None),
    "sweep.max_parallel": ("--max-parallel", "int", 1),
    "seed": ("--seed", "int", 0),
    "output.dir": ("--out", "str", "."),
    "output.format": ("--format", "str", None),
    "force": ("--force", "bool", False),
}

_COMMON = ["seed", "output.dir", "output.format"]
COMMAND_KEYS = {
    "classical-gap": ["model.n", "model.s", "grid.s", "model.j"] + _COMMON,
    "enumerate": ["model.n", "model.s", "grid.s", "model.j",
                  "plan.max_levels"] + _COMMON,
    "mcmc": ["model.n", "model.s", "grid.s", "model.j", "plan.beta",
             "plan.sweeps", "plan.chains", "plan.burn_in",
             "plan.init"] + _COMMON,
    "lid": ["model.n", "model.s", "grid.s", "model.j", "plan.k"] + _COMMON,
    "ed": ["model.n", "model.s", "model.h", "model.b_field", "model.j",
           "plan.k", "plan.ordering", "plan.tol"] + _COMMON,
    "fss": ["fss.generate", "fss.family", "model.n", "grid.control",
            "model.b_field", "model.j", "plan.tol", "fss.curves",
            "fss.x_win", "fss.nu_guess"] + _COMMON,
    "map-s-of-h": ["model.n", "model.h", "grid.h"] + _COMMON,
    "positions": ["model.n", "model.h"] + _COMMON,
    "sweep": ["sweep.command", "sweep.axis1", "sweep.axis2",
              "sweep.max_parallel", "force", "model.n", "model.s", "model.h",
              "model.b_field", "model.j", "plan.beta", "plan.sweeps",
              "plan.chains", "plan.burn_in", "plan.init", "plan.k",
              "plan.ordering", "plan.tol", "plan.max_levels"] + _COMMON,
}

# per-command output row schema; sweep reuses these minus its axis columns
ROW_COLUMNS = {
    "classical-gap": ["n", "s", "phase", "gap", "E0", "degeneracy"],
    "enumerate": ["n", "s", "phase", "gap", "E0", "degeneracy"],
    "mcmc": ["n", "s", "e0", "e1", "gap", "converged", "chains", "sweeps",
             "beta", "seed"],
    "lid": ["n", "s", "k", "lid_mean", "lid_min", "lid_max", "n_sentinels"],
    "ed": ["n", "s", "h", "b_field", "e0", "gap", "xi"],
    "map-s-of-h": ["n", "h", "s2", "s4", "s8", "s_eff"],
}


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        v = float(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    return v


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")


def parse_grid(spec, integer=False) -> list:
    """Grid spec: 'start:stop:step' (both endpoints) or comma-separated."""
    if isinstance(spec, (int, float)):
        vals = [float(spec)]
    else:
        s = str(spec).strip()
        if ":" in s:
            parts = s.split(":")
            if len(parts) != 3:
                raise ValidationError(f"grid spec {s!r} must be start:stop:step")
            try:
                start, stop, step = (float(p) for p in parts)
            except ValueError:
                raise ValidationError(f"grid spec {s!r} has non-numeric parts")
            if step <= 0:
                raise ValidationError(f"grid step must be positive, got {step}")
            count = int(round((stop - start) / step))
            if count < 0 or abs(start + count * step - stop) > 1e-9 * max(1.0, step):
                raise ValidationError(
                    f"grid {s!r}: stop is not start plus a whole number of steps")
            vals = [start + i * step for i in range(count + 1)]
        else:
            try:
                vals = [float(tok) for tok in s.split(",") if tok.strip() != ""]
            except ValueError:
                raise ValidationError(f"grid spec {s!r} has non-numeric parts")
            if not vals:
                raise ValidationError(f"grid spec {s!r} is empty")
    if integer:
        out = []
        for v in vals:
            if abs(v - round(v)) > 1e-9:
                raise ValidationError(f"grid value {v} is not an integer")
            out.append(int(round(v)))
        return out
    return vals


def _flatten(obj, prefix=""):
    flat = {}
    for key, val in obj.items():
        name = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(val, dict):
            flat.update(_flatten(val, name))
        else:
            flat[name] = val
    return flat


def load_config_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}")
    stripped = text.lstrip()
    if str(path).endswith(".json") or stripped.startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file {path} is not valid JSON: {exc}")
        if not isinstance(obj, dict):
            raise ValidationError(f"config file {path} must hold an object")
        # a manifest from a previous run doubles as a config
        if "schema_version" in obj and "config" in obj:
            obj = obj["config"]
        return _flatten(obj)
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(
                f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, val = line.partition("=")
        val = val.strip()
        try:
            cfg[key.strip()] = json.loads(val)
        except json.JSONDecodeError:
            cfg[key.strip()] = val
    return cfg


def _coerce(key, value):
    kind = OPT_DEFS[key][1]
    try:
        if kind == "int":
            if isinstance(value, float) and value != int(value):
                raise ValueError
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "bool":
            if isinstance(value, bool):
                return value
            if str(value).lower() in ("true", "1", "yes"):
                return True
            if str(value).lower() in ("false", "0", "no"):
                return False
            raise ValueError
        if kind == "list":
            if isinstance(value, (list, tuple)):
                return [str(v) for v in value]
            return [tok.strip() for tok in str(value).split(",") if tok.strip()]
        return str(value)
    except (TypeError, ValueError):
        raise ValidationError(f"config key {key!r} has invalid value {value!r}")


def _dest(key: str) -> str:
    return key.replace(".", "__").replace("-", "_")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pwr2lab",
        description="Long-range Ising ring toolkit: classical spectra, "
                    "Monte Carlo, diagonalization, scaling fits, geometry.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="cmd", required=True)
    for cmd, keys in COMMAND_KEYS.items():
        p = sub.add_parser(cmd)
        p.add_argument("--config", default=None,
                       help="config file (dotted keys or JSON; a manifest works)")
        for key in keys:
            flag, kind, _ = OPT_DEFS[key]
            if kind == "bool":
                p.add_argument(flag, dest=_dest(key), action="store_true",
                               default=False)
            elif kind == "list":
                p.add_argument(flag, dest=_dest(key), nargs="+", default=None)
            else:
                typ = {"int": int, "float": float, "str": str}[kind]
                p.add_argument(flag, dest=_dest(key), type=typ, default=None)
    return parser


def resolve_config(cmd: str, ns) -> dict:
    keys = COMMAND_KEYS[cmd]
    cfg = {k: OPT_DEFS[k][2] for k in keys}
    if getattr(ns, "config", None):
        file_cfg = load_config_file(ns.config)
        for key, value in file_cfg.items():
            if key == "command":
                if value != cmd:
                    raise ValidationError(
                        f"config file is for command {value!r}, not {cmd!r}")
                continue
            if key not in keys:
                raise ValidationError(f"unknown config key: {key!r}")
            if value is None:  # manifests store unset keys as null
                continue
            cfg[key] = _coerce(key, value)
    for key in keys:
        value = getattr(ns, _dest(key))
        if OPT_DEFS[key][1] == "bool":
            if value:
                cfg[key] = True
        elif value is not None:
            cfg[key] = value
    return cfg


def _require_n(cfg) -> int:
    n = cfg.get("model.n")
    if n is None:
        raise ValidationError("--n is required")
    if n < 2 or not is_power_of_two(n):
        raise ValidationError(f"n must be a power of two >= 2, got {n}")
    return int(n)


def _control_values(cfg, scalar_key, grid_key, flag, grid_flag) -> list:
    scalar = cfg.get(scalar_key)
    grid = cfg.get(grid_key)
    if (scalar is None) == (grid is None):
        raise ValidationError(f"exactly one of {flag} or {grid_flag} is required")
    return [float(scalar)] if scalar is not None else parse_grid(grid)


def _out_dir(cfg) -> Path:
    path = Path(cfg.get("output.dir") or ".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit_rows(cfg, cmd, rows, default_format="csv"):
    out = _out_dir(cfg)
    form = cfg.get("output.format") or default_format
    if form not in ("csv", "json", "both"):
        raise ValidationError(f"output format must be csv, json, or both, got {form!r}")
    cols = ROW_COLUMNS[cmd]
    written = []
    if form in ("csv", "both"):
        path = out / f"{cmd}.csv"
        write_csv(path, cols, [[r[c] for c in cols] for r in rows])
        written.append(path)
    if form in ("json", "both"):
        path = out / f"{cmd}.json"
        write_json(path, [{c: _jsonable(r[c]) for c in cols} for r in rows])
        written.append(path)
    return written


# per-point row builders, shared by the single commands and sweep

def _point_classical_gap(cfg, seed) -> dict:
    n = _require_n(cfg)
    s = float(cfg["model.s"])
    j = float(cfg["model.j"])
    pred = analytic_gap(n, s, j)
    g = build_pwr2_couplings(n, s, j)
    candidates = [euclidean_afm(n), recursive_ground_state(n),
                  monna_mapped_afm(n)]
    candidates += [SpinConfiguration(n, 1 - c.bits) for c in candidates]
    energies = [classical_energy(c, g) for c in candidates]
    e_min = min(energies)
    tol = 1e-9 * max(1.0, abs(e_min))
    # count of distinct closed-form candidates tied at the minimum; a lower
    # bound on the true degeneracy (enumerate reports the exact count)
    tied = {c.to_int() for c, e in zip(candidates, energies) if e <= e_min + tol}
    return {"n": n, "s": s, "phase": pred.phase, "gap": pred.gap,
            "E0": pred.ground_energy, "degeneracy": len(tied)}


def _point_enumerate(cfg, seed) -> dict:
    n = _require_n(cfg)
    s = float(cfg["model.s"])
    j = float(cfg["model.j"])
    g = build_pwr2_couplings(n, s, j)
    spec = enumerate_spectrum(g, max_levels=cfg.get("plan.max_levels"))
    phase = analytic_gap(n, s, j).phase
    return {"n": n, "s": s, "phase": phase, "gap": spec.gap,
            "E0": spec.ground_energy, "degeneracy": spec.levels[0][1]}


def _point_mcmc(cfg, seed) -> dict:
    n = _require_n(cfg)
    s = float(cfg["model.s"])
    g = build_pwr2_couplings(n, s, float(cfg["model.j"]))
    plan = McmcPlan(beta=cfg.get("plan.beta"), sweeps=cfg.get("plan.sweeps"),
                    chains=int(cfg["plan.chains"]),
                    burn_in=float(cfg["plan.burn_in"]), seed=int(seed),
                    init=str(cfg["plan.init"]))
    est = estimate_low_spectrum(g, plan)
    resolved = plan.resolved(g)
    return {"n": n, "s": s, "e0": est.e0, "e1": est.e1, "gap": est.gap,
            "converged": est.converged, "chains": resolved.chains,
            "sweeps": resolved.sweeps, "beta": resolved.beta,
            "seed": int(seed)}


def _point_lid(cfg, seed) -> dict:
    n = _require_n(cfg)
    s = float(cfg["model.s"])
    g = build_pwr2_couplings(n, s, float(cfg["model.j"]))
    info = mean_lid(g, k=cfg.get("plan.k"))
    finite = info["per_site"][np.isfinite(info["per_site"])]
    lo = float(finite.min()) if len(finite) else float("inf")
    hi = float(finite.max()) if len(finite) else float("inf")
    return {"n": n, "s": s, "k": info["k"], "lid_mean": info["mean_lid"],
            "lid_min": lo, "lid_max": hi, "n_sentinels": info["n_divergent"]}


def _ed_solve(cfg, seed):
    n = _require_n(cfg)
    s, h = cfg.get("model.s"), cfg.get("model.h")
    if (s is None) == (h is None):
        raise ValidationError("exactly one of --s or --h is required")
    j = float(cfg["model.j"])
    if s is not None:
        g = build_pwr2_couplings(n, float(s), j)
    else:
        if j != 1.0:
            raise ValidationError(
                "--j is fixed to 1 in geometry mode; couplings are already "
                "normalized to the nearest-neighbor bond")
        g = rydberg_couplings(tambourine_positions(n, float(h)))
    b = float(cfg["model.b_field"])
    op = build_hamiltonian(g, b)
    k = int(cfg.get("plan.k") or 6)
    sol, gap = ground_with_gap(op, tol=float(cfg["plan.tol"]), seed=int(seed),
                               k0=max(2, k))
    psi = z2_symmetric_ground(op, sol) if b == 0.0 else sol.eigenvectors[:, 0]
    return n, s, h, b, sol, gap, psi


def _point_ed(cfg, seed) -> dict:
    n, s, h, b, sol, gap, psi = _ed_solve(cfg, seed)
    c = correlation_matrix(psi, n)
    return {"n": n, "s": s, "h": h, "b_field": b,
            "e0": sol.ground_energy, "gap": gap, "xi": second_moment_xi(c)}


def _point_map_s_of_h(cfg, seed) -> dict:
    n = _require_n(cfg)
    mapping = s_of_h(n, float(cfg["model.h"]))
    return {"n": n, "h": mapping.h, "s2": mapping.s_k[2], "s4": mapping.s_k[4],
            "s8": mapping.s_k[8], "s_eff": mapping.s_eff}


POINT_FUNCS = {
    "classical-gap": _point_classical_gap,
    "enumerate": _point_enumerate,
    "mcmc": _point_mcmc,
    "lid": _point_lid,
    "ed": _point_ed,
    "map-s-of-h": _point_map_s_of_h,
}


def _run_grid_command(cmd, cfg, scalar_key="model.s", grid_key="grid.s",
                      flag="--s", grid_flag="--s-grid"):
    values = _control_values(cfg, scalar_key, grid_key, flag, grid_flag)
    seed = int(cfg["seed"])
    rows = []
    for value in values:
        point = dict(cfg)
        point[scalar_key] = value
        rows.append(POINT_FUNCS[cmd](point, seed))
    written = _emit_rows(cfg, cmd, rows)
    return f"{cmd}: {len(rows)} rows -> {written[0]}", 0


def _run_ed(cfg):
    n, s, h, b, sol, gap, psi = _ed_solve(cfg, int(cfg["seed"]))
    ordering = str(cfg["plan.ordering"])
    profile = entropy_profile(psi, n, ordering)
    c = correlation_matrix(psi, n)
    qs = [2.0 * math.pi * m / n for m in range(n)]
    sq = [connected_structure_factor(c, q) for q in qs]
    xi = second_moment_xi(c)
    out = _out_dir(cfg)
    form = cfg.get("output.format") or "both"
    if form not in ("csv", "json", "both"):
        raise ValidationError(f"output format must be csv, json, or both, got {form!r}")
    written = []
    if form in ("json", "both"):
        obj = {"schema_version": 1, "n": n, "B": b,
               "energies": _jsonable(sol.eigenvalues), "gap": _jsonable(gap),
               "entropy_profile": _jsonable(profile), "S_q": _jsonable(sq),
               "xi": _jsonable(xi), "ordering": ordering}
        obj["s" if s is not None else "h"] = float(s if s is not None else h)
        path = out / "ed.json"
        write_json(path, obj)
        written.append(path)
    if form in ("csv", "both"):
        write_csv(out / "ed_energies.csv", ["level", "energy"],
                  list(enumerate(sol.eigenvalues)))
        write_csv(out / "ed_entropy.csv", ["cut", "entropy"],
                  list(enumerate(profile, start=1)))
        write_csv(out / "ed_sq.csv", ["q", "S_q"], list(zip(qs, sq)))
        written.append(out / "ed_energies.csv")
    return f"ed: n={n} gap={fmt(gap)} -> {written[0]}", 0


def _run_positions(cfg):
    n = _require_n(cfg)
    h = float(cfg.get("model.h") or 0.0)
    pos = tambourine_positions(n, h)
    rows = [[i, pos[i, 0], pos[i, 1], pos[i, 2],
             "a" if popcount(i) % 2 == 0 else "b"] for i in range(n)]
    out = _out_dir(cfg)
    path = out / "positions.csv"
    write_csv(path, ["i", "x", "y", "z", "species"], rows)
    return f"positions: {n} atoms -> {path}", 0


def _estimate_record(est) -> dict:
    return {"pair": list(est.pair),
            "critical_point": _jsonable(est.critical_point),
            "critical_point_sigma": _jsonable(est.critical_point_sigma),
            "nu": _jsonable(est.nu), "nu_sigma": _jsonable(est.nu_sigma),
            "z": _jsonable(est.z), "z_sigma": _jsonable(est.z_sigma),
            "m_eff": _jsonable(est.m_eff)}


def _extrapolation_record(res) -> dict:
    return {"y_inf": _jsonable(res.y_inf),
            "sigma_stat": _jsonable(res.sigma_stat),
            "omega": _jsonable(res.omega),
            "sigma_sys": _jsonable(res.sigma_sys),
            "sigma_final": _jsonable(res.sigma_final),
            "pairs_used": [list(p) for p in res.pairs_used]}


def _run_fss(cfg):
    out = _out_dir(cfg)
    if cfg.get("fss.generate"):
        n = _require_n(cfg)
        if n > 16:
            raise ValidationError(f"curve generation is capped at n = 16, got {n}")
        if cfg.get("grid.control") is None:
            raise ValidationError("--grid is required with --generate")
        grid = parse_grid(cfg["grid.control"])
        curve = phi_curve(n, grid, family=str(cfg["fss.family"]),
                          b_field=float(cfg["model.b_field"]),
                          j=float(cfg["model.j"]), tol=float(cfg["plan.tol"]),
                          seed=int(cfg["seed"]))
        base = out / f"curve_n{n}"
        save_curve(curve, base)
        return f"fss: curve n={n}, {len(curve.grid)} points -> {base}.csv", 0
    paths = cfg.get("fss.curves")
    if not paths:
        raise ValidationError("need --curves (existing files) or --generate")
    if len(paths) < 2:
        raise ValidationError("need at least two curve files to form a pair")
    curves = sorted((load_curve(p) for p in paths), key=lambda c: c.n)
    estimates = []
    for a, b in zip(curves, curves[1:]):
        estimates.append(estimate_pair(a, b, x_win=float(cfg["fss.x_win"]),
                                       nu_guess=float(cfg["fss.nu_guess"])))
    result = {"schema_version": 1,
              "pairs": [_estimate_record(e) for e in estimates],
              "nu_extrapolation": None, "z_extrapolation": None}
    if len(estimates) >= 3:
        fit = (leave_one_out_systematics if len(estimates) >= 4
               else extrapolate_exponent)
        result["nu_extrapolation"] = _extrapolation_record(
            fit(estimates, "nu"))
        if all(math.isfinite(e.z) for e in estimates):
            result["z_extrapolation"] = _extrapolation_record(
                fit(estimates, "z"))
    path = out / "scaling.json"
    write_json(path, result)
    return f"fss: {len(estimates)} pairs -> {path}", 0


def _parse_axis(spec: str):
    name, sep, grid = str(spec).partition("=")
    name = name.strip()
    if not sep or not grid.strip():
        raise ValidationError(f"axis spec {spec!r} must be name=grid")
    if name not in AXIS_NAMES:
        raise ValidationError(
            f"axis {name!r} is not one of {', '.join(AXIS_NAMES)}")
    return name, parse_grid(grid, integer=(name == "n"))


def _worker_count(max_parallel: int) -> int:
    cap = os.environ.get("PWR2LAB_THREADS")
    if cap is not None:
        try:
            cap_val = int(cap)
        except ValueError:
            raise ValidationError(f"PWR2LAB_THREADS must be an integer, got {cap!r}")
        if cap_val < 1:
            raise ValidationError(f"PWR2LAB_THREADS must be >= 1, got {cap_val}")
        max_parallel = min(max_parallel, cap_val)
    return max(1, max_parallel)


def _run_sweep(cfg):
    command = cfg.get("sweep.command")
    if command not in SWEEPABLE:
        raise ValidationError(
            f"sweep command must be one of {', '.join(SWEEPABLE)}, got {command!r}")
    if cfg.get("sweep.axis1") is None:
        raise ValidationError("--axis1 is required for a sweep")
    axes = [_parse_axis(cfg["sweep.axis1"])]
    if cfg.get("sweep.axis2") is not None:
        axes.append(_parse_axis(cfg["sweep.axis2"]))
    names = [a[0] for a in axes]
    if len(set(names)) != len(names):
        raise ValidationError(f"sweep axes must differ, got {names[0]} twice")
    sizes = [len(a[1]) for a in axes]
    total = sizes[0] * (sizes[1] if len(sizes) > 1 else 1)
    if total > MAX_SWEEP_POINTS:
        raise ValidationError(
            f"sweep has {total} points, cap is {MAX_SWEEP_POINTS}")
    max_parallel = int(cfg["sweep.max_parallel"])
    if max_parallel < 1:
        raise ValidationError(f"max_parallel must be >= 1, got {max_parallel}")
    out = _out_dir(cfg)
    path = out / "sweep.csv"
    if path.exists() and not cfg.get("force"):
        raise ValidationError(f"{path} already exists; pass --force to replace it")

    key_of = {"s": "model.s", "h": "model.h", "b_field": "model.b_field",
              "n": "model.n"}
    master = int(cfg["seed"])
    grids = [a[1] for a in axes]
    points = []
    for index in range(total):
        coords = ((index // sizes[1], index % sizes[1]) if len(axes) > 1
                  else (index,))
        values = [grids[d][coords[d]] for d in range(len(axes))]
        points.append((index, values))

    def run_point(item):
        index, values = item
        point = dict(cfg)
        for name, value in zip(names, values):
            point[key_of[name]] = value
        try:
            payload = POINT_FUNCS[command](point, derive_seed(master, index))
            return index, values, payload, None
        except Pwr2LabError as exc:
            return index, values, None, exc

    workers = _worker_count(max_parallel)
    if workers == 1:
        results = [run_point(p) for p in points]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_point, points))

    payload_cols = [c for c in ROW_COLUMNS[command] if c not in names]
    header = ["index"] + names + payload_cols + ["status", "error"]
    rows, failures = [], 0
    for index, values, payload, err in results:
        row = [index] + list(values)
        if err is None:
            row += [payload[c] for c in payload_cols] + ["ok", ""]
        else:
            failures += 1
            row += [""] * len(payload_cols) + [type(err).__name__, str(err)]
        rows.append(row)
    write_csv(path, header, rows)
    if failures:
        print(f"warning: {failures} of {total} sweep points failed",
              file=sys.stderr)
    return f"sweep: {total} points, {failures} failed -> {path}", failures


def write_manifest(cfg, command: str, wall_time: float):
    out = _out_dir(cfg)
    manifest = {"schema_version": MANIFEST_SCHEMA_VERSION, "command": command,
                "config": {k: _jsonable(v) for k, v in sorted(cfg.items())},
                "seed": int(cfg.get("seed") or 0),
                "tool_version": __version__,
                "wall_time_s": round(wall_time, 6)}
    write_json(out / "manifest.json", manifest)


def _dispatch(cmd: str, cfg: dict) -> int:
    start = time.perf_counter()
    if cmd in ("classical-gap", "enumerate", "mcmc", "lid"):
        summary, _ = _run_grid_command(cmd, cfg)
    elif cmd == "ed":
        summary, _ = _run_ed(cfg)
    elif cmd == "fss":
        summary, _ = _run_fss(cfg)
    elif cmd == "map-s-of-h":
        values = _control_values(cfg, "model.h", "grid.h", "--h", "--h-grid")
        rows = []
        for h in values:
            point = dict(cfg)
            point["model.h"] = h
            rows.append(_point_map_s_of_h(point, int(cfg["seed"])))
        written = _emit_rows(cfg, "map-s-of-h", rows)
        summary = f"map-s-of-h: {len(rows)} rows -> {written[0]}"
    elif cmd == "positions":
        summary, _ = _run_positions(cfg)
    elif cmd == "sweep":
        summary, _ = _run_sweep(cfg)
    else:  # pragma: no cover - argparse restricts choices
        raise ValidationError(f"unknown command {cmd!r}")
    write_manifest(cfg, cmd, time.perf_counter() - start)
    print(summary)
    return 0


def _merge_grid_values(argv):
    """Join grid flags with their values: '--s-grid -6:6:0.25' confuses
    argparse because the value starts with a dash but is not a plain
    negative number, so rewrite it to the '--s-grid=-6:6:0.25' form."""
    grid_flags = ("--s-grid", "--h-grid", "--grid")
    merged, i = [], 0
    while i < len(argv):
        if argv[i] in grid_flags and i + 1 < len(argv):
            merged.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            merged.append(argv[i])
            i += 1
    return merged


def main(argv=None) -> int:
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    try:
        ns = parser.parse_args(_merge_grid_values(list(argv)))
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(ns.cmd, ns)
        return _dispatch(ns.cmd, cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
