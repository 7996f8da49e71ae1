"""Command-line front end producing reproducible CSV/JSON artifacts.

Every subcommand resolves its parameters in three layers: built-in
defaults, then a ``--config`` JSON file, then explicit flags.  A finished
run writes a manifest listing the resolved parameters and every output
file; feeding that manifest back through ``--config`` reruns the job and
reproduces the data files byte for byte, whatever ``--workers`` says.

Exit codes: 0 success, 2 bad configuration or input, 3 solver or
convergence failure, 4 file system trouble.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .disorder import generate_instance, save_instance
from .errors import (
    CheckpointError,
    ConvergenceError,
    DomainError,
    InstanceParseError,
    InsufficientDataError,
    InvalidSizeError,
    NumericsError,
    QaglassError,
    SizeLimitError,
    UnconvergedInputError,
)
from .meanfield import (
    MeanFieldParams,
    QuadratureSpec,
    overlap_mf,
    solve_noisy_selected,
    solve_original,
    sweep_field_mf,
)
from .overlap import RealizationRecord, SweepConfig, fit_power_law, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_IO = 4

_CONFIG_ERRORS = (DomainError, InvalidSizeError, SizeLimitError,
                  InstanceParseError, ValueError)
_CONVERGENCE_ERRORS = (ConvergenceError, InsufficientDataError,
                       UnconvergedInputError, NumericsError)
_IO_ERRORS = (CheckpointError, OSError)


def _fmt(x: float) -> str:
    # .17g round-trips every float64, so reruns rewrite identical bytes
    return format(float(x), ".17g")


def _utcnow() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _parse_grid(text) -> tuple:
    """Grid syntax: 'start:step:stop' (stop included) or 'a,b,c'."""
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    text = str(text)
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise DomainError(f"grid must be start:step:stop, got {text!r}")
        start, step, stop = (float(p) for p in parts)
        if step <= 0:
            raise DomainError(f"grid step must be > 0, got {step}")
        vals = np.round(np.arange(start, stop + 0.5 * step, step), 10)
        return tuple(float(v) for v in vals)
    return tuple(float(p) for p in text.split(","))


def _load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DomainError(f"config file {path} is not valid JSON: {exc}")
    if isinstance(data, dict) and "command" in data and "params" in data:
        data = data["params"]  # manifests are accepted wherever configs are
    if not isinstance(data, dict):
        raise DomainError(f"config file {path} must hold a JSON object")
    return data


def _resolve(args, defaults: dict) -> dict:
    """Defaults, overlaid by the config file, overlaid by explicit flags."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        file_cfg = _load_config_file(args.config)
        unknown = sorted(set(file_cfg) - set(defaults))
        if unknown:
            raise DomainError(f"unknown config keys: {unknown}")
        merged.update(file_cfg)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _write_json(path: str, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest_path(data_path: str) -> str:
    stem, _ = os.path.splitext(data_path)
    return stem + "_manifest.json"


def _write_manifest(path, command, params, master_seed, artifacts, started):
    _write_json(path, {
        "command": command,
        "tool_version": __version__,
        "master_seed": master_seed,
        "params": params,
        "artifacts": list(artifacts),
        "started_utc": started,
        "finished_utc": _utcnow(),
    })


def _quad_from(params: dict) -> QuadratureSpec | None:
    no, ni = params.get("nodes_outer"), params.get("nodes_inner")
    if no is None and ni is None:
        return None  # let the solvers pick beta-scaled defaults
    base = QuadratureSpec()
    return QuadratureSpec(int(no or base.n_nodes_outer),
                          int(ni or base.n_nodes_inner))


# ---------------------------------------------------------------- gen

GEN_DEFAULTS = {
    "n_sites": 16,
    "sigma": 1.0,
    "gamma": 0.4,
    "seed": 20260301,
    "out": "instance.json",
}


def cmd_gen(args) -> int:
    p = _resolve(args, GEN_DEFAULTS)
    started = _utcnow()
    inst = generate_instance(int(p["n_sites"]), float(p["sigma"]),
                             float(p["gamma"]), int(p["seed"]))
    save_instance(inst, p["out"])
    _write_manifest(_manifest_path(p["out"]), "gen", p, int(p["seed"]),
                    [p["out"]], started)
    print(f"wrote {p['out']}", file=sys.stderr)
    return EXIT_OK


# ------------------------------------------------------- ladder-sweep

LADDER_SWEEP_DEFAULTS = {
    "n_sites": 16,
    "sigma": 1.0,
    "gamma": 0.4,
    "seed": 20260301,
    "grid": "0:0.1:2",
    "n_realizations": 300,
    "solver": "lanczos",
    "chi": 64,
    "tol": 1e-10,
    "workers": 1,
    "out_dir": ".",
    "prefix": "sweep",
}

_REAL_HEADER = ["realization", "gamma_field", "overlap", "solver_status"]
_CURVE_HEADER = ["gamma_field", "mean_M", "stderr", "n", "flagged_rate"]


def _status_str(rec: RealizationRecord) -> str:
    if rec.status == "ok" and rec.n_flagged > 0:
        return f"ok;flagged={rec.n_flagged}"
    return rec.status


def _record_from_row(row) -> RealizationRecord:
    k, g, ov, status = row
    n_flagged = 0
    if status.startswith("ok;flagged="):
        n_flagged = int(status.split("=", 1)[1])
        status = "ok"
    return RealizationRecord(int(k), float(g), float(ov), status, n_flagged)


def _read_progress(path: str, cfg: SweepConfig) -> dict:
    """Records of every fully finished realization in an earlier run.

    Realizations with missing or duplicated grid points (a run killed
    mid-write) are dropped and recomputed.
    """
    if not os.path.exists(path):
        return {}
    by_k: dict[int, list[RealizationRecord]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _REAL_HEADER:
            return {}
        for row in reader:
            if len(row) != 4:
                continue
            try:
                rec = _record_from_row(row)
            except ValueError:
                continue
            by_k.setdefault(rec.realization, []).append(rec)
    grid = [float(g) for g in cfg.gamma_grid]
    done = {}
    for k, recs in by_k.items():
        if not 0 <= k < cfg.n_realizations:
            continue
        found = {r.gamma_field: r for r in recs}
        if len(recs) == len(grid) and sorted(found) == sorted(grid):
            done[k] = [found[g] for g in grid]
    return done


def _write_realization_rows(writer, records):
    for rec in records:
        writer.writerow([rec.realization, _fmt(rec.gamma_field),
                         _fmt(rec.overlap), _status_str(rec)])


def cmd_ladder_sweep(args) -> int:
    p = _resolve(args, LADDER_SWEEP_DEFAULTS)
    cfg = SweepConfig(
        n_sites=int(p["n_sites"]),
        sigma=float(p["sigma"]),
        gamma=float(p["gamma"]),
        master_seed=int(p["seed"]),
        gamma_grid=_parse_grid(p["grid"]),
        n_realizations=int(p["n_realizations"]),
        solver=p["solver"],
        chi=int(p["chi"]),
        tol=float(p["tol"]),
    )
    out_dir = p["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    curve_path = os.path.join(out_dir, f"{p['prefix']}_curve.csv")
    reals_path = os.path.join(out_dir, f"{p['prefix']}_realizations.csv")
    meta_path = os.path.join(out_dir, f"{p['prefix']}_curve.meta.json")
    started = _utcnow()

    cfg_dict = json.loads(json.dumps(asdict(cfg)))  # tuples become lists
    precomputed = {}
    if args.resume:
        if os.path.exists(meta_path):
            if _load_config_file(meta_path) != cfg_dict:
                raise DomainError(
                    "resume refused: existing run at this prefix used "
                    "different parameters")
        precomputed = _read_progress(reals_path, cfg)
        print(f"resuming: {len(precomputed)}/{cfg.n_realizations} "
              "realizations already done", file=sys.stderr)
    _write_json(meta_path, cfg_dict)

    # progress log doubles as the resume source, so keep it append-only
    # during the run and rewrite it canonically once everything is in
    with open(reals_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_REAL_HEADER)
        for k in sorted(precomputed):
            _write_realization_rows(writer, precomputed[k])
        fh.flush()

        def on_result(k, recs):
            _write_realization_rows(writer, recs)
            fh.flush()

        def progress(done, total):
            print(f"realization {done}/{total}", file=sys.stderr)

        curve, records = run_sweep(cfg, workers=int(p["workers"]),
                                   progress=progress,
                                   precomputed=precomputed,
                                   on_result=on_result)

    with open(reals_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_REAL_HEADER)
        _write_realization_rows(writer, records)

    with open(curve_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CURVE_HEADER)
        for pt in curve:
            writer.writerow([_fmt(pt.gamma_field), _fmt(pt.mean_overlap),
                             _fmt(pt.stderr), pt.n_realizations,
                             _fmt(pt.flagged_rate)])

    n_failed = sum(1 for r in records if r.status != "ok")
    if n_failed:
        print(f"warning: {n_failed} of {len(records)} solves failed; "
              f"details in {reals_path}", file=sys.stderr)

    manifest = os.path.join(out_dir, f"{p['prefix']}_manifest.json")
    _write_manifest(manifest, "ladder-sweep", p, cfg.master_seed,
                    [curve_path, reals_path, meta_path], started)
    print(f"wrote {curve_path}", file=sys.stderr)
    return EXIT_OK


# ------------------------------------------------------------ mf-solve

MF_SOLVE_DEFAULTS = {
    "sigma": 0.5,
    "gamma": 0.75,
    "j0": 1.0,
    "beta0": 30.0,
    "beta": 30.0,
    "field": 1.0,
    "nodes_outer": None,
    "nodes_inner": None,
    "out": "mf_point.json",
}


def cmd_mf_solve(args) -> int:
    p = _resolve(args, MF_SOLVE_DEFAULTS)
    started = _utcnow()
    params = MeanFieldParams(sigma=float(p["sigma"]),
                             gamma_noise=float(p["gamma"]),
                             j0=float(p["j0"]), beta0=float(p["beta0"]),
                             beta=float(p["beta"]))
    quad = _quad_from(p)
    field = float(p["field"])
    original = solve_original(params, quad)
    if not original.converged:
        raise ConvergenceError("clean-system equations did not converge",
                               residual=original.residual, stage="original")
    choice = solve_noisy_selected(params, field, quad, original=original)
    sol = choice.solution
    if not sol.converged:
        raise ConvergenceError("noisy-system equations did not converge",
                               residual=sol.residual, stage="noisy")
    overlap = overlap_mf(params, field, original, sol, quad)
    result = {
        "sigma": params.sigma, "gamma_noise": params.gamma_noise,
        "j0": params.j0, "beta0": params.beta0, "beta": params.beta,
        "field": field,
        "m0": original.m0, "q0": original.q0,
        "m": sol.m, "q": sol.q, "r": sol.r,
        "overlap": overlap,
        "residual": sol.residual, "iterations": sol.iterations,
        "converged": sol.converged,
        "replicon": sol.replicon,
        "rsb_warning": bool(sol.replicon > 1.0 or sol.n_projections > 0),
    }
    _write_json(p["out"], result)
    _write_manifest(_manifest_path(p["out"]), "mf-solve", p, None,
                    [p["out"]], started)
    print(f"wrote {p['out']}", file=sys.stderr)
    return EXIT_OK


# ------------------------------------------------------------ mf-sweep

MF_SWEEP_DEFAULTS = {
    "sigma": 0.5,
    "gamma": "0.75",
    "j0": 1.0,
    "beta0": 30.0,
    "beta": 30.0,
    "field_grid": "0.05:0.075:2.0",
    "nodes_outer": None,
    "nodes_inner": None,
    "workers": 1,
    "out_dir": ".",
    "prefix": "mf",
}

_MF_HEADER = ["gamma_noise", "field", "m0", "q0", "m", "q", "r",
              "overlap", "residual", "converged", "rsb_warning"]


def _mf_sweep_one(task):
    kwargs, grid, quad = task
    params = MeanFieldParams(**kwargs)
    points, _ = sweep_field_mf(params, grid, quad)
    return points


def cmd_mf_sweep(args) -> int:
    p = _resolve(args, MF_SWEEP_DEFAULTS)
    started = _utcnow()
    gammas = _parse_grid(p["gamma"])
    grid = _parse_grid(p["field_grid"])
    quad = _quad_from(p)
    tasks = [(dict(sigma=float(p["sigma"]), gamma_noise=float(gn),
                   j0=float(p["j0"]), beta0=float(p["beta0"]),
                   beta=float(p["beta"])), grid, quad) for gn in gammas]

    workers = int(p["workers"])
    results = []
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_mf_sweep_one, t) for t in tasks]
            for i, fut in enumerate(futures):  # input order, not completion
                results.append(fut.result())
                print(f"gamma_noise={gammas[i]:g} done "
                      f"({i + 1}/{len(tasks)})", file=sys.stderr)
    else:
        for i, t in enumerate(tasks):
            results.append(_mf_sweep_one(t))
            print(f"gamma_noise={gammas[i]:g} done ({i + 1}/{len(tasks)})",
                  file=sys.stderr)

    out_dir = p["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{p['prefix']}_curve.csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_MF_HEADER)
        for gn, points in zip(gammas, results):
            for pt in points:
                writer.writerow([
                    _fmt(gn), _fmt(pt.gamma_field), _fmt(pt.m0),
                    _fmt(pt.q0), _fmt(pt.m), _fmt(pt.q), _fmt(pt.r),
                    _fmt(pt.overlap), _fmt(pt.residual),
                    str(pt.converged).lower(),
                    str(pt.rsb_warning).lower(),
                ])

    all_points = [pt for points in results for pt in points]
    n_bad = sum(1 for pt in all_points if not pt.converged)
    if n_bad == len(all_points):
        raise ConvergenceError("no mean-field point converged")
    if n_bad:
        print(f"warning: {n_bad} of {len(all_points)} points did not "
              "converge", file=sys.stderr)

    manifest = os.path.join(out_dir, f"{p['prefix']}_manifest.json")
    _write_manifest(manifest, "mf-sweep", p, None, [csv_path], started)
    print(f"wrote {csv_path}", file=sys.stderr)
    return EXIT_OK


# ----------------------------------------------------------------- fit

FIT_DEFAULTS = {
    "points": None,
    "x_col": None,
    "y_col": None,
    "out": "fit.json",
}


def cmd_fit(args) -> int:
    p = _resolve(args, FIT_DEFAULTS)
    if not p["points"]:
        raise DomainError("fit needs a points CSV (positional or config)")
    started = _utcnow()
    with open(p["points"], newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or len(reader.fieldnames) < 2:
            raise DomainError("points CSV needs a header with >= 2 columns")
        x_col = p["x_col"] or reader.fieldnames[0]
        y_col = p["y_col"] or reader.fieldnames[1]
        for col in (x_col, y_col):
            if col not in reader.fieldnames:
                raise DomainError(f"no column {col!r} in {p['points']}")
        xs, ys = [], []
        for row in reader:
            xs.append(float(row[x_col]))
            ys.append(float(row[y_col]))
    amplitude, exponent, rms = fit_power_law(xs, ys)
    _write_json(p["out"], {
        "amplitude": amplitude,
        "exponent": exponent,
        "rms_log_residual": rms,
        "n_points": len(xs),
        "x_col": x_col,
        "y_col": y_col,
    })
    _write_manifest(_manifest_path(p["out"]), "fit",
                    {**p, "points": p["points"]}, None, [p["out"]], started)
    print(f"wrote {p['out']}", file=sys.stderr)
    return EXIT_OK


# ------------------------------------------------------------- parser

def _add_common(sub):
    sub.add_argument("--config", help="JSON config or manifest; flags override")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qaglass",
        description="Ground-state recovery experiments for noisy ladder "
                    "Ising models and their mean-field analysis.")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    s = subs.add_parser("gen", help="generate one disorder instance")
    _add_common(s)
    s.add_argument("--n-sites", dest="n_sites", type=int)
    s.add_argument("--sigma", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_gen)

    s = subs.add_parser("ladder-sweep",
                        help="overlap curve over the field grid")
    _add_common(s)
    s.add_argument("--n-sites", dest="n_sites", type=int)
    s.add_argument("--sigma", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--grid", help="field grid, start:step:stop or a,b,c")
    s.add_argument("--n-realizations", dest="n_realizations", type=int)
    s.add_argument("--solver", choices=["lanczos", "dmrg"])
    s.add_argument("--chi", type=int)
    s.add_argument("--tol", type=float)
    s.add_argument("--workers", type=int)
    s.add_argument("--out-dir", dest="out_dir")
    s.add_argument("--prefix")
    s.add_argument("--resume", action="store_true",
                   help="reuse finished realizations from an earlier run")
    s.set_defaults(func=cmd_ladder_sweep)

    s = subs.add_parser("mf-solve", help="one mean-field point")
    _add_common(s)
    s.add_argument("--sigma", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--j0", type=float)
    s.add_argument("--beta0", type=float)
    s.add_argument("--beta", type=float)
    s.add_argument("--field", type=float)
    s.add_argument("--nodes-outer", dest="nodes_outer", type=int)
    s.add_argument("--nodes-inner", dest="nodes_inner", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_mf_solve)

    s = subs.add_parser("mf-sweep",
                        help="mean-field order parameters over field grid")
    _add_common(s)
    s.add_argument("--sigma", type=float)
    s.add_argument("--gamma", help="noise widths, one value or a,b,c")
    s.add_argument("--j0", type=float)
    s.add_argument("--beta0", type=float)
    s.add_argument("--beta", type=float)
    s.add_argument("--field-grid", dest="field_grid",
                   help="field grid, start:step:stop or a,b,c")
    s.add_argument("--nodes-outer", dest="nodes_outer", type=int)
    s.add_argument("--nodes-inner", dest="nodes_inner", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--out-dir", dest="out_dir")
    s.add_argument("--prefix")
    s.set_defaults(func=cmd_mf_sweep)

    s = subs.add_parser("fit", help="power-law fit of a points CSV")
    _add_common(s)
    s.add_argument("points", nargs="?")
    s.add_argument("--x-col", dest="x_col")
    s.add_argument("--y-col", dest="y_col")
    s.add_argument("--out")
    s.set_defaults(func=cmd_fit)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _CONVERGENCE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except _IO_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except QaglassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
