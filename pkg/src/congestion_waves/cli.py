"""Command-line entry point: ``profile``, ``simulate``, ``audit`` and ``sweep``.

Exit codes: 0 success, 2 invalid configuration or parameters, 3 numerical
failure (congestion, solver), 4 file-system error.  On failure a one-line
JSON object ``{"error": kind, "message": ..., "exit_code": ...}`` is written
to stderr.
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import dataclasses
import json
import os
from pathlib import Path
import sys
import warnings

import numpy as np

from . import audit as audit_mod
from .config import parse_config
from .diagnostics import decay_metrics, energies, integrated_fields, smallness_amplitude, smallness_check
from .errors import (
    AdmissibilityError,
    CongestionError,
    ConfigError,
    DomainError,
    InvalidParametersError,
    ResolutionError,
    SingularPivotError,
    SizeMismatchError,
    SolverFailure,
    UnsupportedOrderError,
    NonpositiveCoefficientError,
)
from .numerics import Grid
from .pde import initial_state, run
from .profile import envelope_bounds, shock_limit_error, solve_profile, verify_envelopes

__all__ = ["main", "build_parser"]

EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 2, 3, 4
_VALIDATION = (ConfigError, InvalidParametersError, AdmissibilityError, DomainError, SizeMismatchError,
               UnsupportedOrderError, NonpositiveCoefficientError)
_NUMERICAL = (CongestionError, SolverFailure, SingularPivotError, ResolutionError, ArithmeticError)
FLOAT_FMT = "%.16e"


def _write_csv(path, header, rows):
    rows = np.asarray(rows, dtype=float).reshape(-1, len(header))
    np.savetxt(path, rows, delimiter=",", header=",".join(header), comments="", fmt=FLOAT_FMT)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if np.isfinite(value) else repr(value)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------- subcommands


def cmd_profile(cfg, out):
    prof = solve_profile(cfg.model, cfg.grid)
    report = verify_envelopes(prof)
    if "csv" in cfg.outputs.formats:
        d1, d2, d3 = prof.derivatives
        lower, upper = envelope_bounds(cfg.grid.xi, cfg.model)
        _write_csv(out / "profile.csv",
                   ("xi", "v_eps", "u_eps", "w_eps", "lower_bound", "upper_bound", "dv", "d2v", "d3v"),
                   np.column_stack([cfg.grid.xi, prof.v_eps, prof.u_eps, prof.w_eps, lower, upper, d1, d2, d3]))
    if "json" in cfg.outputs.formats:
        _write_json(out / "bounds.json", report.to_dict())
    return {"pass": report.passed, "max_lower_violation": report.max_lower_violation,
            "max_upper_violation": report.max_upper_violation}


def _scenario(cfg, params):
    prof = solve_profile(params, cfg.grid)
    spec = cfg.perturbation
    if cfg.smallness_margin is not None:
        spec = smallness_amplitude(prof, spec, params, T=cfg.diagnostics.horizon, delta0=cfg.diagnostics.delta0,
                                   margin=cfg.smallness_margin, c=cfg.diagnostics.c)
    return prof, spec, initial_state(prof, spec)


def cmd_simulate(cfg, out, params=None):
    params = cfg.model if params is None else params
    prof, spec, state0 = _scenario(cfg, params)
    report0 = energies(state0, prof, params, cfg.diagnostics.c)
    W0 = integrated_fields(state0, prof).W0
    small = smallness_check(report0, W0, cfg.grid, params, cfg.diagnostics.horizon, cfg.diagnostics.delta0,
                            cfg.diagnostics.c)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        traj = run(state0, cfg.time.t_end, params, prof, dt=cfg.time.dt, stride=cfg.time.snapshot_stride,
                   c=cfg.diagnostics.c, scheme=cfg.scheme)
    summary = traj.summary()
    summary.update({
        "epsilon": params.epsilon,
        "amplitude": spec.amplitude,
        "smallness": small.to_dict(),
        "x_norm_over_eps3": summary["x_norm_sq"] / params.epsilon**3,
        "warnings": sorted({str(w.message) for w in caught}),
    })
    if "csv" in cfg.outputs.formats:
        xi = cfg.grid.xi
        rows = [np.column_stack([np.full_like(xi, s.t), xi, s.state.v, s.state.w, s.u, prof.v_eps])
                for s in traj.snapshots]
        _write_csv(out / "snapshots.csv", ("t", "xi", "v", "w", "u", "v_eps"), np.vstack(rows))
        names = [f.name for f in dataclasses.fields(traj.snapshots[0].report)]
        _write_csv(out / "energy.csv", names, [[getattr(s.report, n) for n in names] for s in traj.snapshots])
        _write_csv(out / "decay.csv", ("t", "sup_v_dev", "sup_u_dev", "e0", "x_norm_sq"), decay_metrics(traj))
    if "json" in cfg.outputs.formats:
        _write_json(out / "summary.json", summary)
    return summary


def cmd_audit(cfg, out):
    params = cfg.model
    prof = solve_profile(params, cfg.grid)
    reports = (
        audit_mod.audit_veps_derivatives(prof, params, cfg.audit.k_max)
        + audit_mod.audit_psi_estimate(params)
        + audit_mod.audit_h_bounds(prof, params, delta=cfg.audit.delta)
        + audit_mod.audit_linear_operator_bounds(prof, params, alpha=cfg.audit.alpha)
    )
    payload = [r.to_dict() for r in reports]
    if "json" in cfg.outputs.formats:
        _write_json(out / "audit.json", payload)
    return {"pass": all(r.passed for r in reports), "reports": len(reports)}


def _sweep_point(args):
    cfg, eps, directory = args
    params = cfg.model.with_epsilon(eps)
    directory.mkdir(parents=True, exist_ok=True)
    summary = cmd_simulate(cfg, directory, params)
    return eps, summary


def _workers(n_jobs):
    cap = os.environ.get("CONGESTION_WAVES_THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError:
            raise InvalidParametersError(f"CONGESTION_WAVES_THREADS must be an integer, got {cap!r}") from None
    return max(1, min(limit, n_jobs))


def cmd_sweep(cfg, out, epsilons=None):
    epsilons = tuple(cfg.epsilons if epsilons is None else epsilons)
    # the profile is anchored at xi = 0, so a window-aligned grid at the
    # configured spacing gives the same profile on the window
    window = 5.0
    aligned = Grid(-window, window, int(round(2 * window / cfg.grid.dx)) + 1)
    shock = dict(shock_limit_error(epsilons, window=window, params=cfg.model, grid=aligned))
    jobs = [(cfg, eps, out / f"eps_{eps:g}") for eps in epsilons]
    workers = _workers(len(jobs))
    if workers == 1:
        results = [_sweep_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    header = ("epsilon", "shock_limit_l1", "amplitude", "x_norm_sq", "x_norm_over_eps3", "final_sup_v_dev",
              "final_sup_u_dev", "max_mass_v_drift", "max_mass_u_drift", "max_energy_ratio", "min_v")
    rows = [[eps, shock[eps], s["amplitude"], s["x_norm_sq"], s["x_norm_over_eps3"], s["final_sup_v_dev"],
             s["final_sup_u_dev"], s["max_mass_v_drift"], s["max_mass_u_drift"], s["max_energy_ratio"],
             s["min_v"]] for eps, s in results]
    if "csv" in cfg.outputs.formats:
        _write_csv(out / "sweep_summary.csv", header, rows)
    if "json" in cfg.outputs.formats:
        _write_json(out / "sweep_summary.json", [dict(zip(header, r)) for r in rows])
    errors = [shock[e] for e in epsilons]
    return {"points": len(rows), "shock_limit_monotone": all(b < a for a, b in zip(errors, errors[1:]))}


# ---------------------------------------------------------------- entry point


def build_parser():
    parser = argparse.ArgumentParser(prog="congestion-waves",
                                     description="Travelling congestion waves: profiles, dynamics and audits.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="default", help="INI file, or 'default' for built-in values")
    common.add_argument("--out", default=None, help="output directory (overrides outputs.directory)")
    common.add_argument("--quiet", action="store_true", help="suppress the JSON result line on stdout")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("profile", parents=[common], help="solve the travelling profile and check its envelopes")
    sub.add_parser("simulate", parents=[common], help="run the perturbed dynamics")
    sub.add_parser("audit", parents=[common], help="fit the constants of the a-priori bounds")
    sweep = sub.add_parser("sweep", parents=[common], help="repeat simulate over several eps values")
    sweep.add_argument("--epsilons", default=None, help="comma-separated eps values")
    return parser


def _fail(kind, message, code):
    payload = {"error": kind, "message": message, "exit_code": code}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def _kind(err, default):
    return getattr(err, "kind", None) or default


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        epsilons = None
        if getattr(args, "epsilons", None):
            try:
                epsilons = tuple(float(x) for x in args.epsilons.split(",") if x.strip())
            except ValueError:
                raise InvalidParametersError(f"cannot read --epsilons {args.epsilons!r}") from None
            if not epsilons or any(not e > 0 for e in epsilons):
                raise InvalidParametersError(f"--epsilons must be positive values, got {args.epsilons!r}")
    except OSError as err:
        return _fail("io-error", str(err), EXIT_IO)
    except _VALIDATION as err:
        return _fail(_kind(err, "validation-error"), str(err), EXIT_VALIDATION)

    out = Path(args.out if args.out is not None else cfg.outputs.directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "profile":
            result = cmd_profile(cfg, out)
        elif args.command == "simulate":
            result = cmd_simulate(cfg, out)
        elif args.command == "audit":
            result = cmd_audit(cfg, out)
        else:
            result = cmd_sweep(cfg, out, epsilons)
    except OSError as err:
        return _fail("io-error", str(err), EXIT_IO)
    except _VALIDATION as err:
        return _fail(_kind(err, "validation-error"), str(err), EXIT_VALIDATION)
    except _NUMERICAL as err:
        return _fail(_kind(err, "numerical-error"), str(err), EXIT_NUMERICAL)
    if not args.quiet:
        print(json.dumps(_jsonable(result), sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
