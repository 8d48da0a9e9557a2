"""Command-line entry point.

Exit codes: 0 success, 1 invalid input (config, order parameter, flags),
2 numerical failure (non-PSD increment, quadrature mismatch, non-convergence).
Errors are reported as one JSON object on standard error.
"""

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels, mcoracle, pde, potts, sdecheck, verify
from .config import COMMANDS, PRESETS, ConfigError, RunConfig, load
from .functional import evaluate, tilt
from .optimize import minimize
from .paths import DerivedPath
from .symmat import NotPsd

SCHEMA = "vecparisi.report/1"


class NumericalFailure(RuntimeError):
    """A computation finished but did not meet its own convergence criterion."""


def _clean(obj):
    """JSON-ready copy: numpy types to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def dumps(obj):
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def build_parser():
    parser = argparse.ArgumentParser(prog="vecparisi", description="Parisi PDE and functional for vector spin glasses.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML or JSON config file")
        p.add_argument("--preset", choices=sorted(PRESETS), help="built-in config (file values override it)")
        p.add_argument("--output", help="directory for artifacts (default: standard output)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--no-meta", action="store_true", help="omit timestamps and timings")
        if name == "potts":
            p.add_argument("--dim", type=int)
            p.add_argument("--betas", help="comma list of p:beta, e.g. 2:1.0,3:0.5")
            p.add_argument("--case", type=int, choices=(1, 2))
    return parser


def _parse_betas(text):
    try:
        pairs = [item.split(":") for item in text.split(",") if item.strip()]
        return [[int(p), float(b)] for p, b in pairs]
    except ValueError as exc:
        raise ConfigError(f"cannot parse --betas {text!r}; expected p:beta,...") from exc


def resolve_config(args):
    raw = {}
    if args.config:
        cfg = load(args.config).to_dict()
        raw.update(cfg)
    if args.preset:
        raw = {"preset": args.preset, **raw}
    cfg = RunConfig.from_dict(raw)
    if args.seed is not None:
        cfg.mc["seed"] = int(args.seed)
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return cfg


def _solution(cfg):
    cfg.require("model", "psi", "alpha", "base")
    derived = DerivedPath(cfg.model, cfg.psi)
    base = tilt(cfg.base, cfg.model, cfg.psi.z)
    return pde.solve(base, derived, cfg.alpha, cfg.grid), derived, base


def cmd_eval_phi(cfg, args):
    sol, derived, base = _solution(cfg)
    s, x = float(cfg.point["s"]), cfg.point_x()
    report = {
        "point": {"s": s, "x": x},
        "phi": sol.value(s, x),
        "grad": sol.grad(s, x).tolist(),
        "hess": sol.hess(s, x).tolist(),
        "grid": sol.grid.to_config(),
        "alpha": cfg.alpha.to_config(),
    }
    if cfg.mc["oracle"]:
        if s != 0.0:
            raise ConfigError("the Monte-Carlo oracle evaluates s = 0 only")
        sampler = mcoracle.NestedSampler(cfg.alpha, derived, base, cfg.mc["widths"], cfg.mc["seed"])
        report["oracle"] = mcoracle.estimate_phi0(sampler, x, cfg.mc["replications"])
    return report, sol.export_csv


def cmd_eval_functional(cfg, args):
    cfg.require("model", "psi", "alpha", "base")
    value = evaluate(cfg.model, cfg.psi, cfg.alpha, cfg.base, cfg.grid)
    report = {"functional": value.to_dict(), "grid": cfg.grid.to_config(), "alpha": cfg.alpha.to_config()}

    def write_csv(path):
        with open(path, "w") as fh:
            fh.write("term,value\n")
            for k, v in value.to_dict().items():
                fh.write(f"{k},{v!r}\n")

    return report, write_csv


def cmd_minimize(cfg, args):
    cfg.require("model", "psi", "base")
    res = minimize(cfg.model, cfg.psi, cfg.base, cfg.optimize_config(args.threads), cfg.grid)
    report = res.to_dict()
    if not res.converged:
        report["error"] = "no convergence within max_iters; best iterate returned"
    return report, res.write_trace_csv


def cmd_sde_check(cfg, args):
    sol, _, _ = _solution(cfg)
    cp = sdecheck.ControlProblem(
        sol, cfg.point_x(), float(cfg.point["s"]), float(cfg.point["t"]),
        int(cfg.mc["paths"]), int(cfg.mc["steps"]), int(cfg.mc["seed"]),
    )
    run = sdecheck.simulate_optimal(cp)
    report = sdecheck.run_checks(cp)
    report["hessian_evolution"] = sdecheck.hessian_evolution_check(run, control_variate=False)
    c = pde.hessian_bounds(sol, (cp.s,))["C"]
    report["uniqueness_window"] = sdecheck.uniqueness_window_check(cp, c)
    if cfg.base.dim > 1 and cfg.model.is_quadratic():
        report["w_component_drift"] = sdecheck.direction_constancy(run, np.ones(cfg.base.dim))
    return report, None


def cmd_potts(cfg, args):
    p = dict(cfg.potts)
    if args.dim is not None:
        p["dim"] = args.dim
    if args.betas is not None:
        p["betas"] = _parse_betas(args.betas)
    if args.case is not None:
        p["case"] = args.case
        if args.betas is None:
            p["betas"] = [[2, 1.0]] if args.case == 2 else [[2, 1.0], [3, 1.0]]
    setup = potts.PottsSetup(int(p["dim"]), tuple(tuple(b) for b in p["betas"]))
    case = p["case"] or (2 if setup.quadratic_only() else 1)
    if case == 2 and not setup.quadratic_only():
        raise ConfigError("case 2 is the beta_2-only model")
    if case == 1 and setup.quadratic_only():
        raise ConfigError("case 1 needs some beta_p > 0 with p >= 3")
    report = {"dim": setup.dim, "betas": [list(b) for b in setup.betas], "case": case}
    report["path_identities"] = potts.path_identities(setup.dim)
    if case == 2:
        report["gamma_identities"] = potts.gamma_identities(setup)
    else:
        report["gamma_pd"] = potts.gamma_pd_check(setup)
    if setup.dim <= 3:
        # Coarser default grids keep the multi-start minimization at desk scale.
        grid = cfg.grid if cfg.grid != pde.GridSpec() else pde.GridSpec(h=0.1 if setup.dim == 2 else 0.2)
        report["degenerate_directions"] = potts.degenerate_direction_checks(setup, grid, seed=cfg.mc["seed"])
        report["convexity"] = potts.potts_convexity_experiment(
            setup, int(p["pairs"]), cfg.mc["seed"], grid, int(p["K"]), int(p["starts"])
        )
    return report, None


def cmd_verify(cfg, args):
    rows = verify.run_suite(cfg.mc["seed"])
    return {"rows": rows, "passed": all(r["passed"] for r in rows)}, None


CSV_COMMANDS = ("eval-phi", "eval-functional", "minimize")

HANDLERS = {
    "eval-phi": cmd_eval_phi,
    "eval-functional": cmd_eval_functional,
    "minimize": cmd_minimize,
    "sde-check": cmd_sde_check,
    "potts": cmd_potts,
    "verify": cmd_verify,
}


def _error(kind, exc, code):
    sys.stderr.write(dumps({"error": kind, "type": type(exc).__name__, "message": str(exc), "exit_code": code}))
    return code


def _emit(args, report, csv_writer):
    name = args.command
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        if args.format == "csv":
            csv_writer(str(out / f"{name}.csv"))
        (out / f"{name}.json").write_text(dumps(report))
    if name == "verify":
        sys.stdout.write(verify.format_table(report["rows"]))
    elif not args.output:
        sys.stdout.write(dumps(report))


def _check_format(args):
    if args.format == "csv":
        if args.command not in CSV_COMMANDS:
            raise ConfigError(f"'{args.command}' has no CSV output; use --format json")
        if not args.output:
            raise ConfigError("--format csv writes files and needs --output")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.time()
    try:
        _check_format(args)
        cfg = resolve_config(args)
        report, csv_writer = HANDLERS[args.command](cfg, args)
        report = {"schema": SCHEMA, "command": args.command, "config": cfg.to_dict(), **report}
        if not args.no_meta:
            report["meta"] = {
                "version": __version__,
                "backend": kernels.BACKEND,
                "threads": args.threads,
                "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
                "elapsed_s": time.time() - start,
            }
        _emit(args, report, csv_writer)
        if args.command == "minimize" and not report["converged"]:
            raise NumericalFailure(report["error"])
        if args.command == "verify" and not report["passed"]:
            raise NumericalFailure("some verification checks failed")
    except NotPsd as exc:
        return _error("numerical", exc, 2)
    except (ArithmeticError, NumericalFailure, FloatingPointError) as exc:
        return _error("numerical", exc, 2)
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        return _error("validation", exc, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
