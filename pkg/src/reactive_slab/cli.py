"""Command-line interface: ``reactive-slab {solve,contraction,check-config}``.

Exit codes: 0 success, 1 invalid configuration, 2 no convergence,
3 equilibrium breakdown.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .config import (ConfigError, RunConfig, compute_boundary_budget, load_run_config, validate_boundary,
                     validate_physical)
from .diagnostics import full_bound_report
from .grid import DEFAULT_VMAX, GridError, build_grid
from .io import (atomic_write_text, dump_field, load_field, make_layout, table_text, write_json,
                 write_profiles)
from .slow import EquilibriumBreakdown
from .solver import Problem, SolverError, estimate_contraction, fit_contraction, solve

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_BREAKDOWN = 0, 1, 2, 3

log = logging.getLogger("reactive_slab")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reactive-slab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, type=Path, help="experiment config file")
        p.add_argument("-v", "--verbose", action="store_true", help="echo the iteration log to stderr")

    def run_opts(p):
        p.add_argument("--model", choices=("slow", "fast"), help="override [solver] model")
        p.add_argument("--out", type=Path, default=Path("run"), help="output directory (default: ./run)")
        p.add_argument("--tol", type=float, help="override [solver] tol")
        p.add_argument("--max-iter", type=int, help="override [solver] max_iter")
        p.add_argument("--threads", type=int, help="override [solver] threads (0: all cores)")

    p = sub.add_parser("solve", help="run the fixed-point iteration and write profiles and reports")
    common(p)
    run_opts(p)
    p.add_argument("--tau", type=float, help="override [interaction] tau")
    p.add_argument("--resume", type=Path, help="continue from a field dump")
    p.add_argument("--dump-every", type=int, default=0, help="write fields/sweep_NNNN.npz every N sweeps")

    p = sub.add_parser("contraction", help="measure the empirical contraction factor for several tau")
    common(p)
    run_opts(p)
    p.add_argument("--tau-list", type=float, nargs="+", required=True)
    p.add_argument("--probes", type=int, help="override [solver] probes")
    p.add_argument("--seed", type=int, help="override [solver] seed")

    p = sub.add_parser("check-config", help="validate a config and print the boundary budget")
    common(p)
    return parser


def _problem(run: RunConfig, args, model: str | None = None) -> Problem:
    cfg = run.physical
    if getattr(args, "tau", None) is not None:
        cfg = cfg.with_tau(args.tau)
    g = run.grid
    grid = build_grid(g.nx, g.nv1, g.nv23, g.vmax or DEFAULT_VMAX)
    threads = args.threads if getattr(args, "threads", None) is not None else run.solver.threads
    threads = threads or os.cpu_count() or 1
    validate_physical(cfg)
    return Problem.build(model or run.solver.model, cfg, run.boundary, grid, threads)


def _setup_logging(verbose: bool):
    log.setLevel(logging.INFO)
    for h in list(log.handlers):
        log.removeHandler(h)
        h.close()
    if verbose:
        h = logging.StreamHandler(sys.stderr)
        h.setFormatter(logging.Formatter("%(message)s"))
        log.addHandler(h)


def cmd_check_config(args) -> int:
    run = load_run_config(args.config)
    g = run.grid
    grid = build_grid(g.nx, g.nv1, g.nv23, g.vmax or DEFAULT_VMAX)
    validate_boundary(run.boundary, grid, run.physical)
    budget = compute_boundary_budget(run.boundary, run.physical, grid)
    cfg = run.physical
    payload = {
        "masses": cfg.masses.tolist(),
        "delta_e": cfg.delta_e,
        "mu12": cfg.mu12,
        "mu34": cfg.mu34,
        "tau": cfg.tau,
        "grid": {"nx": grid.nx, "nv1": grid.shape[0], "nv23": grid.shape[1], "vmax": grid.vmax},
        "budget": budget.as_dict(),
    }
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_solve(args) -> int:
    run = load_run_config(args.config)
    problem = _problem(run, args, args.model)
    out = make_layout(args.out)
    tol = args.tol if args.tol is not None else run.solver.tol
    max_iter = args.max_iter if args.max_iter is not None else run.solver.max_iter
    lines: list[str] = []

    initial, start, history = None, 0, ()
    if args.resume is not None:
        initial, start, history, model = load_field(args.resume, problem.grid)
        if model != problem.model:
            raise ConfigError(f"field dump {args.resume} belongs to the {model} model, not {problem.model}")

    dist: list[float] = []

    # a dump at sweep k carries d_1..d_k so a resumed run keeps the divergence counter
    def on_sweep(k, f, rec):
        dist.append(rec.distance)
        lines.append(rec.log_line())
        if args.dump_every and k % args.dump_every == 0:
            dump_field(out / "fields" / f"sweep_{k:04d}.npz", f, k, history + tuple(dist), problem.model)

    try:
        field, report = solve(problem, tol=tol, max_iter=max_iter, initial=initial,
                              relaxation=run.solver.relaxation, start_sweep=start, history=history,
                              on_sweep=on_sweep)
    except EquilibriumBreakdown:
        atomic_write_text(out / "logs" / "iterations.log", "\n".join(lines) + "\n")
        raise
    atomic_write_text(out / "logs" / "iterations.log", "\n".join(lines) + "\n")
    write_json(out / "reports" / "solve_summary.json", report.summary())
    write_json(out / "reports" / "budget.json", problem.budget.as_dict())
    dump_field(out / "fields" / "final.npz", field, report.iterations, report.distances, problem.model)
    if report.final_equilibrium is not None:
        write_profiles(out, problem.grid, report.final_moments, report.final_equilibrium)
        bounds = full_bound_report(report.final_moments, report.final_equilibrium, problem.budget,
                                   problem.cfg, problem.model)
        atomic_write_text(out / "reports" / "bounds.txt", bounds.to_table())
    if not report.converged:
        print(f"reactive-slab: {report.message}", file=sys.stderr)
        tail = ", ".join(f"{d:.3e}" for d in report.distances[-6:])
        print(f"reactive-slab: last distances: {tail}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    print(f"{problem.model} model: {report.message}, final mild residual {report.final_residual:.3e}")
    return EXIT_OK


def cmd_contraction(args) -> int:
    run = load_run_config(args.config)
    problem = _problem(run, args, args.model)
    out = make_layout(args.out)
    tol = args.tol if args.tol is not None else run.solver.tol
    max_iter = args.max_iter if args.max_iter is not None else run.solver.max_iter
    probes = args.probes if args.probes is not None else run.solver.probes
    seed = args.seed if args.seed is not None else run.solver.seed
    table = estimate_contraction(problem, args.tau_list, probes=probes, seed=seed, tol=tol, max_iter=max_iter)
    rows = [[r.tau, r.alpha_hat, r.probes, r.rejected, r.sweeps] for r in table.rows]
    text = table_text(("tau", "alpha_hat", "probes", "rejected", "sweeps"), rows)
    atomic_write_text(out / "reports" / "contraction.csv", text)
    if len(table.rows) >= 2:
        fit = fit_contraction(table.taus, table.alphas)
        write_json(out / "reports" / "contraction_fit.json", {
            "slope": fit.slope, "intercept": fit.intercept, "scale": fit.scale, "spread": fit.spread,
        })
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "contraction": cmd_contraction, "check-config": cmd_check_config}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, GridError) as exc:
        print(f"reactive-slab: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except EquilibriumBreakdown as exc:
        print(f"reactive-slab: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN
    except SolverError as exc:
        print(f"reactive-slab: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
