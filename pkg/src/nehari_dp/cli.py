"""Command-line entry point: ``nehari-dp {solve,sweep,threshold,verify,props}``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analysis import estimate_lambda_star, lambda_sweep
from .config import DEFAULT_CONFIG, load_config
from .errors import ConfigError, NehariError, NotSplit
from .mesh import read_node_csv
from .properties import run_all
from .report import plot_sweep, write_report, write_solve_report, write_sweep_csv
from .solver import find_two_solutions, verify_weak_solution

EXIT_USAGE, EXIT_CONFIG, EXIT_SOLVER, EXIT_PROPS = 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration (defaults built in)")
    common.add_argument("--out", type=Path, help="output directory (overrides the config)")
    common.add_argument("--lambda", dest="lam", type=float, help="override the parameter value")
    common.add_argument("--seed", type=int, help="seed for starts, probes and property samples")
    common.add_argument("--jobs", type=int, help="worker threads")

    parser = _Parser(prog="nehari-dp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("solve", parents=[common], help="compute both branch minimisers")
    sw = sub.add_parser("sweep", parents=[common], help="solve across a geometric parameter grid")
    sw.add_argument("--lambda-min", type=float, default=1e-3)
    sw.add_argument("--lambda-max", type=float, default=10.0)
    sw.add_argument("--lambda-steps", type=int, default=12)
    th = sub.add_parser("threshold", parents=[common], help="bracket the largest admissible parameter")
    th.add_argument("--resolution", type=float, default=1e-3)
    ve = sub.add_parser("verify", parents=[common], help="re-check a stored node CSV")
    ve.add_argument("solution", type=Path)
    ve.add_argument("--branch", choices=("plus", "minus"))
    ve.add_argument("--tol", type=float, default=1e-6)
    sub.add_parser("props", parents=[common], help="run the invariant suite")
    return parser


def _load(args):
    cfg = load_config(args.config) if args.config else DEFAULT_CONFIG
    if args.lam is not None:
        cfg = replace(cfg, lam=args.lam)
        cfg.build_problem()
    opts = cfg.solver
    if args.seed is not None:
        opts = replace(opts, seed=args.seed)
    if args.jobs is not None:
        opts = replace(opts, jobs=args.jobs)
    out = args.out if args.out is not None else Path(cfg.output)
    return replace(cfg, solver=opts), out


def _solve(cfg, out):
    prob = cfg.build_problem()
    try:
        plus, minus = find_two_solutions(prob, cfg.solver)
    except NotSplit as exc:
        for rep in exc.reports:
            write_solve_report(rep, out, rep.branch.value)
        raise
    for rep in (plus, minus):
        write_solve_report(rep, out, rep.branch.value)
        print(f"{rep.branch.value}: energy={rep.energy!r} residual={rep.residual_norm:.3e} "
              f"iterations={rep.iterations}")
    return 0


def _sweep(cfg, out, args):
    if not (0 < args.lambda_min < args.lambda_max) or args.lambda_steps < 2:
        raise ConfigError("sweep grid needs 0 < lambda-min < lambda-max and at least 2 steps")
    grid = np.geomspace(args.lambda_min, args.lambda_max, args.lambda_steps)
    table = lambda_sweep(cfg.build_problem(), grid, cfg.solver, jobs=cfg.solver.jobs)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(table, out / "sweep.csv")
    plot_sweep(table, out / "sweep.svg")
    for row in table.rows:
        print(f"lambda={row.lam:.6g} m_plus={row.m_plus:.6g} m_minus={row.m_minus:.6g} {row.status}")
    return 0


def _threshold(cfg, out, args):
    est = estimate_lambda_star(cfg.build_problem(), resolution=args.resolution, opts=cfg.solver)
    out.mkdir(parents=True, exist_ok=True)
    write_report(est, out / "threshold.json")
    print(f"lambda_star in [{est.lambda_lo:.6g}, {est.lambda_hi:.6g}] (ray bound {est.ray_bound:.6g})")
    return 0


def _verify(cfg, out, args):
    prob = cfg.build_problem()
    u = read_node_csv(prob.mesh, args.solution)
    rep = verify_weak_solution(u, prob, args.tol, args.branch)
    out.mkdir(parents=True, exist_ok=True)
    write_report(rep, out / f"verify_{args.solution.stem}.json")
    for k, v in rep.checks.items():
        print(f"{k}: {'ok' if v else 'FAILED'}")
    print(f"residual={rep.residual_norm:.3e} energy={rep.energy!r}")
    return 0 if rep.passed else EXIT_SOLVER


def _props(cfg, out):
    results = run_all(seed=cfg.solver.seed)
    for res in results:
        print(res.line())
    return 0 if all(r.passed for r in results) else EXIT_PROPS


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, out = _load(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "solve":
            return _solve(cfg, out)
        if args.command == "sweep":
            return _sweep(cfg, out, args)
        if args.command == "threshold":
            return _threshold(cfg, out, args)
        if args.command == "verify":
            return _verify(cfg, out, args)
        return _props(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NehariError, OSError, ValueError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
