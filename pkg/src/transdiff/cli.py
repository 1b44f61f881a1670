"""Command-line front end: ``transdiff run --config exp.json --out results/``.

A run validates the JSON configuration, computes everything in memory and
only then writes ``report.json`` plus experiment CSV files. Exit status is
0 when every check passes, 2 when some check fails and 1 on configuration
or runtime errors (nothing is written in that case).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from dataclasses import replace

import jsonschema
import numpy as np
from scipy import special

from . import __version__, pde_ref
from .coeffs import coefficients_from_config
from .exceptions import TransdiffError
from .feynman_kac import (
    ComparisonCase,
    InitialData,
    LocalTimeCase,
    compare_with_reference,
    local_time_identification,
    richardson_check,
)
from .geometry import geometry_from_config
from .report import Report
from .sde_engine import SimConfig, simulate_ensemble, simulate_path
from .skew1d import Skew1DModel, density_axioms, sampler_check

EXPERIMENTS = ("fk-compare", "density-check", "spectral-suite", "aronson", "localtime", "ensemble-dump")

_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_VECTOR = {"type": "array", "items": {"type": "number"}, "minItems": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["experiment"],
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["hyperplane", "sphere", "ellipse"]},
                "normal": _VECTOR, "offset": {"type": "number"},
                "center": _VECTOR, "radius": _POSITIVE,
                "semi_axes": _VECTOR, "plus": {"enum": ["interior", "exterior"]},
            },
        },
        "coefficients": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "diagonal": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["eps_plus", "eps_minus"],
                    "properties": {"eps_plus": _POSITIVE, "eps_minus": _POSITIVE},
                },
                "family": {"type": "string"},
                "params": {"type": "object"},
            },
        },
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "required": ["dt_bulk", "n_paths"],
            "properties": {
                "dt_bulk": _POSITIVE, "layer_halfwidth": _POSITIVE, "horizon": _POSITIVE,
                "n_paths": {"type": "integer", "minimum": 0},
                "scheme": {"enum": ["layer_skew", "naive_euler_occupation"]},
                "local_time_mode": {"enum": ["skew_step", "occupation"]},
                "threads": {"type": "integer", "minimum": 1},
            },
        },
        "probes": {
            "type": "object",
            "additionalProperties": False,
            "required": ["points", "times"],
            "properties": {
                "points": {"type": "array", "items": _VECTOR, "minItems": 1},
                "times": {"type": "array", "items": _POSITIVE, "minItems": 1},
            },
        },
        "initial_data": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["smoothed_step", "gaussian_bump", "halfspace_indicator", "constant"]},
                "direction": _VECTOR, "center": _VECTOR,
                "width": _POSITIVE, "amplitude": {"type": "number"}, "value": {"type": "number"},
            },
        },
        "bias_budget": {"type": "number", "minimum": 0},
        "richardson": {"type": "boolean"},
        "reference_cells": {"type": "integer", "minimum": 16, "maximum": 4096},
        "start": _VECTOR,
        "horizon": _POSITIVE,
        "density": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"t": _POSITIVE, "x": {"type": "number"}, "n_draws": {"type": "integer", "minimum": 1},
                           "dt": _POSITIVE},
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["lo", "hi", "n"],
            "properties": {"lo": {"type": "number"}, "hi": {"type": "number"},
                           "n": {"type": "integer", "minimum": 16}, "interface": {"type": "number"}},
        },
        "pairs": {"type": "integer", "minimum": 1},
        "t": _POSITIVE,
        "t_list": {"type": "array", "items": _POSITIVE, "minItems": 1},
        "trace_paths": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    },
    "allOf": [
        {"if": {"properties": {"experiment": {"const": "fk-compare"}}},
         "then": {"required": ["geometry", "coefficients", "simulation", "probes", "initial_data"]}},
        {"if": {"properties": {"experiment": {"const": "density-check"}}},
         "then": {"required": ["coefficients"]}},
        {"if": {"properties": {"experiment": {"enum": ["spectral-suite", "aronson"]}}},
         "then": {"required": ["coefficients", "grid"]}},
        {"if": {"properties": {"experiment": {"enum": ["localtime", "ensemble-dump"]}}},
         "then": {"required": ["geometry", "coefficients", "simulation", "start", "horizon"]}},
    ],
}


class UsageError(Exception):
    """Configuration rejected before any computation."""


# -- configuration ---------------------------------------------------------------


def _field_path(err):
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)


def load_config(path):
    """Parse and validate a configuration file; raises :class:`UsageError`."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    errors = sorted(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(cfg),
                    key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            where = _field_path(e)
            msg = e.message
            if e.absolute_path and e.absolute_path[-1] in ("eps_plus", "eps_minus"):
                msg = (f"ellipticity condition violated: diffusivities must be strictly positive "
                       f"and finite ({msg})")
            lines.append(f"{path}: {where}: {msg}")
        raise UsageError("\n".join(lines))
    return cfg, hashlib.sha256(text.encode()).hexdigest()


def _sim_config(cfg, horizon, seed, threads, fld):
    s = cfg["simulation"]
    dt = s["dt_bulk"]
    h = s.get("layer_halfwidth", 3.0 * np.sqrt(fld.Lam * dt))
    return SimConfig(dt_bulk=dt, layer_halfwidth=h, horizon=horizon, n_paths=s["n_paths"], seed=seed,
                     scheme=s.get("scheme", "layer_skew"),
                     local_time_mode=s.get("local_time_mode", "skew_step"),
                     threads=threads or s.get("threads", 1))


def _initial_data(spec, dim):
    kind = spec["kind"]
    direction = np.asarray(spec.get("direction", [1.0] + [0.0] * (dim - 1)), dtype=float)
    direction = direction / np.linalg.norm(direction)
    if kind == "smoothed_step":
        w = spec.get("width", 0.1)
        return InitialData(lambda x: special.ndtr(x @ direction / w), 1.0,
                           lambda d: d / (w * np.sqrt(2 * np.pi)), "smoothed_step")
    if kind == "halfspace_indicator":
        return InitialData(lambda x: (x @ direction > 0).astype(float), 1.0, lambda d: 1.0,
                           "halfspace_indicator")
    if kind == "gaussian_bump":
        c = np.asarray(spec.get("center", [0.0] * dim), dtype=float)
        w = spec.get("width", 0.5)
        a = spec.get("amplitude", 1.0)
        return InitialData(lambda x: a * np.exp(-np.sum((x - c) ** 2, axis=1) / (2 * w**2)), abs(a),
                           lambda d: abs(a) * d / (w * np.sqrt(np.e)), "gaussian_bump")
    v = spec.get("value", 1.0)
    return InitialData(lambda x: np.full(len(x), float(v)), abs(v), lambda d: 0.0, "constant")


def _diagonal(cfg):
    c = cfg["coefficients"]
    if "diagonal" not in c:
        raise UsageError("this experiment needs diagonal coefficients")
    return c["diagonal"]["eps_plus"], c["diagonal"]["eps_minus"]


# -- experiments ------------------------------------------------------------------------


def _fk_compare(cfg, seed, threads):
    geom = geometry_from_config(cfg["geometry"])
    fld = coefficients_from_config(cfg["coefficients"], geom.dim)
    times = cfg["probes"]["times"]
    sim = _sim_config(cfg, max(times), seed, threads, fld)
    case = ComparisonCase(fld, geom, _initial_data(cfg["initial_data"], geom.dim),
                          cfg["probes"]["points"], times, sim, cfg.get("bias_budget", 0.0),
                          cfg.get("reference_cells", 4096), cfg.get("description", "fk-compare"))
    header = ["x", "t", "mc", "std_error", "reference", "discrepancy", "tolerance", "passed"]

    def table(rows):
        return [[";".join(_num(v) for v in r["x"])] + [r[k] for k in header[1:]] for r in rows]

    if cfg.get("richardson", False):
        rep = richardson_check(case)
        return rep, {"probes.csv": (header, table(rep.data["coarse"]["probes"])),
                     "probes_half_step.csv": (header, table(rep.data["fine"]["probes"]))}
    rep = compare_with_reference(case)
    return rep, {"probes.csv": (header, table(rep.data["probes"]))}


def _density_check(cfg, seed, threads):
    ep, em = _diagonal(cfg)
    d = cfg.get("density", {})
    t, x = d.get("t", 0.5), d.get("x", 0.0)
    model = Skew1DModel(ep, em)
    rep = Report(f"density check (eps+={ep}, eps-={em})")
    rep.extend(density_axioms(model, t, x))
    oracle = pde_ref.fv_density_distance(ep, em, t, x)
    rep.extend(oracle, "fv_oracle_")
    rep.extend(sampler_check(model, x, d.get("dt", 1.0), d.get("n_draws", 10**6), seed), "sampler_")
    y = oracle.data["centers"]
    table = [[yi, e, f] for yi, e, f in zip(y, oracle.data["exact"], oracle.data["fv"])]
    rep.data.update(t=t, x=x)
    return rep, {"density.csv": (["y", "exact", "fv"], table)}


def _grid(cfg):
    g = cfg["grid"]
    if not g["hi"] > g["lo"]:
        raise UsageError("$.grid: hi must exceed lo")
    return pde_ref.Grid1D.uniform(g["lo"], g["hi"], g["n"], interface=g.get("interface", 0.0))


def _spectral_suite(cfg, seed, threads):
    ep, em = _diagonal(cfg)
    op = pde_ref.assemble_1d(ep, em, _grid(cfg))
    rng = np.random.Generator(np.random.PCG64(seed))
    k = cfg.get("pairs", 20)
    fs = [rng.standard_normal(op.n) for _ in range(k)]
    gs = [rng.standard_normal(op.n) for _ in range(k)]
    rep = Report("spectral suite")
    rep.extend(op.check_invariants(), "operator_")
    rep.extend(pde_ref.semigroup_identity_suite(op, fs, gs, t=cfg.get("t", 1.0)))
    gamma, _ = op.eigen
    return rep, {"eigenvalues.csv": (["k", "gamma"], [[i, g] for i, g in enumerate(gamma)])}


def _aronson(cfg, seed, threads):
    ep, em = _diagonal(cfg)
    op = pde_ref.assemble_1d(ep, em, _grid(cfg))
    res = pde_ref.discrete_density_aronson(op, cfg.get("t_list", [0.05, 0.1, 0.2, 0.4]))
    rows = [[r["t"], r["M"], r["M_upper"], r["M_lower"], r["pairs"]] for r in res.data["per_t"]]
    return res, {"fitted_constants.csv": (["t", "M", "M_upper", "M_lower", "pairs"], rows)}


def _localtime(cfg, seed, threads):
    geom = geometry_from_config(cfg["geometry"])
    fld = coefficients_from_config(cfg["coefficients"], geom.dim)
    sim = _sim_config(cfg, cfg["horizon"], seed, threads, fld)
    case = LocalTimeCase(fld, geom, np.asarray(cfg["start"], dtype=float), cfg["horizon"])
    rep = local_time_identification(case, sim)
    keys = [k for k in ("skew_step", "occupation", "skew_step_half_layer", "occupation_half_layer",
                        "fv_occupation_density", "closed_form") if k in rep.data]
    return rep, {"local_time.csv": (["estimator", "E_K_T"], [[k, rep.data[k]] for k in keys])}


def _ensemble_dump(cfg, seed, threads):
    geom = geometry_from_config(cfg["geometry"])
    fld = coefficients_from_config(cfg["coefficients"], geom.dim)
    sim = _sim_config(cfg, cfg["horizon"], seed, threads, fld)
    x0 = np.asarray(cfg["start"], dtype=float)
    ens = simulate_ensemble(x0, fld, geom, sim)
    rep = Report("ensemble dump")
    occ_sum = ens.occupation.sum(axis=1) if ens.n_paths else np.array([sim.horizon])
    rep.add("occupation_identity", float(np.max(np.abs(occ_sum - sim.horizon))), 1e-12 * sim.horizon)
    rep.add("K_nondecreasing", ens.min_increment, 0.0, ">=")
    rep.add("K_support_outside_layer", ens.max_increment_outside_layer, 0.0)
    rep.data.update(summary=ens.summary())
    dim = geom.dim
    header = ["path"] + [f"x{j + 1}" for j in range(dim)] + ["K", "occupation_plus", "occupation_minus",
                                                             "occupation_layer"]
    rows = [[i, *ens.terminal[i], ens.K[i, -1], *ens.occupation[i]] for i in range(ens.n_paths)]
    files = {"terminal.csv": (header, rows)}
    for i in cfg.get("trace_paths", []):
        traj = simulate_path(x0, fld, geom, replace(sim, trace=True), i)
        files[f"trace_{i}.csv"] = (["t"] + [f"x{j + 1}" for j in range(dim)] + ["K"], traj.trace.tolist())
    return rep, files


_RUNNERS = {
    "fk-compare": _fk_compare,
    "density-check": _density_check,
    "spectral-suite": _spectral_suite,
    "aronson": _aronson,
    "localtime": _localtime,
    "ensemble-dump": _ensemble_dump,
}


# -- output ------------------------------------------------------------------------------


def _num(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(v) for v in r])
    return buf.getvalue()


def _write_outputs(out_dir, report_obj, files):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report_obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    for name, (header, rows) in files.items():
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            fh.write(_csv_text(header, rows))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def run(config_path, out_dir=None, seed=None, threads=None, stream=None):
    """Run one experiment; returns the exit status."""
    stream = stream or sys.stderr
    try:
        cfg, digest = load_config(config_path)
        seed = int(cfg.get("seed", 0) if seed is None else seed)
        if not 0 <= seed < 2**64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        if threads is not None and threads < 1:
            raise UsageError("--threads must be at least 1")
        rep, files = _RUNNERS[cfg["experiment"]](cfg, seed, threads)
    except UsageError as exc:
        print(f"config error: {exc}", file=stream)
        return 1
    except KeyError as exc:
        print(f"config error: missing field {exc.args[0]!r}", file=stream)
        return 1
    except TransdiffError as exc:
        print(f"error: {exc}", file=stream)
        return 1
    data = {k: v for k, v in rep.data.items() if k not in ("centers", "fv", "exact")}
    report_obj = _jsonable({
        "experiment": cfg["experiment"],
        "passed": rep.passed,
        "checks": [c.to_dict() for c in rep.checks],
        "data": data,
        "seed": seed,
        "config_sha256": digest,
        "version": __version__,
        "config": cfg,
    })
    out_dir = out_dir or os.path.join("results", os.path.splitext(os.path.basename(config_path))[0])
    _write_outputs(out_dir, report_obj, files)
    for c in rep.checks:
        print(c.line(), file=stream)
    return 0 if rep.passed else 2


def build_parser():
    p = argparse.ArgumentParser(prog="transdiff", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment from a JSON config")
    r.add_argument("config_file", nargs="?", help="config path (alternative to --config)")
    r.add_argument("--config", dest="config", help="path to the JSON experiment config")
    r.add_argument("--out", help="output directory (default: results/<config name>)")
    r.add_argument("--seed", type=int, help="override the config seed (unsigned 64-bit)")
    r.add_argument("--threads", type=int, help="cap on worker threads")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    path = args.config or args.config_file
    if path is None:
        parser.error("a config path is required (positional or --config)")
    return run(path, args.out, args.seed, args.threads)


if __name__ == "__main__":
    sys.exit(main())
