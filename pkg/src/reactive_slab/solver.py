"""Picard iteration of the mild-solution operator and contraction measurement."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import (SPECIES, BoundaryBudget, BoundaryData, PhysicalConfig,
                     compute_boundary_budget, validate_boundary)
from .fast import RootSolveError, fast_equilibrium
from .fields import DegenerateFieldError, DistributionField, field_moments, metric, omega_membership
from .grid import PhaseGrid
from .slow import EquilibriumBreakdown, maxwellian, slow_equilibrium
from .transport import FrequencyProfile, apply_mild_operator

log = logging.getLogger(__name__)

MODELS = ("slow", "fast")
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 500
DIVERGENCE_RUN = 5
RESIDUAL_EVERY = 10


class SolverError(RuntimeError):
    """Iteration stopped without converging (divergence or iteration cap)."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class Problem:
    """Everything one sweep needs, tabulated once."""

    model: str
    cfg: PhysicalConfig
    grid: PhaseGrid
    f_left: np.ndarray
    f_right: np.ndarray
    budget: BoundaryBudget
    threads: int = 1

    @classmethod
    def build(cls, model: str, cfg: PhysicalConfig, bd: BoundaryData, grid: PhaseGrid,
              threads: int = 1) -> "Problem":
        if model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {model!r}")
        f_left, f_right = validate_boundary(bd, grid, cfg)
        budget = compute_boundary_budget(bd, cfg, grid)
        return cls(model, cfg, grid, f_left, f_right, budget, threads)

    def with_tau(self, tau: float) -> "Problem":
        return Problem(self.model, self.cfg.with_tau(tau), self.grid, self.f_left, self.f_right,
                       self.budget, self.threads)

    def with_model(self, model: str) -> "Problem":
        return Problem(model, self.cfg, self.grid, self.f_left, self.f_right, self.budget, self.threads)


@dataclass(frozen=True)
class SweepState:
    """Equilibrium built from one iterate, plus what the sweep produced."""

    moments: object
    equilibrium: object
    frequencies: FrequencyProfile
    image: DistributionField


def equilibrium_of(f: DistributionField, problem: Problem):
    """Moments, reactive equilibrium and frequency profile of the field ``f``."""
    moments = field_moments(f, problem.cfg)
    if problem.model == "slow":
        eq = slow_equilibrium(moments, problem.cfg)
    else:
        eq = fast_equilibrium(moments, problem.cfg)
    return moments, eq, FrequencyProfile.from_nodes(eq.nu, problem.grid.x)


def apply_operator(f: DistributionField, problem: Problem) -> SweepState:
    """One application of the solution operator, ``Phi`` or ``Phi~``."""
    moments, eq, freq = equilibrium_of(f, problem)
    image = apply_mild_operator(problem.f_left, problem.f_right, eq, freq, problem.grid,
                                problem.cfg.tau, problem.cfg, threads=problem.threads)
    return SweepState(moments, eq, freq, image)


def mild_residual_of(f: DistributionField, problem: Problem) -> float:
    """``d(f, Phi f)``: zero exactly at a discrete fixed point."""
    return metric(f, apply_operator(f, problem).image)


def initial_guess(f_left: np.ndarray, f_right: np.ndarray, grid: PhaseGrid) -> DistributionField:
    """Inflow carried unchanged to every node (incoming half from each wall)."""
    values = np.broadcast_to((f_left + f_right)[:, None, :], (SPECIES, grid.x.size, grid.nv))
    return DistributionField(values.copy(), grid)


def budget_maxwellian_guess(budget: BoundaryBudget, grid: PhaseGrid, cfg: PhysicalConfig) -> DistributionField:
    """Resting Maxwellians with density ``a_u/2`` and energy ``c_u/2`` per species.

    These sit in the middle of the budget brackets, so the field is an
    admissible starting point distinct from :func:`initial_guess`.
    """
    values = np.empty((SPECIES, grid.x.size, grid.nv))
    for i in range(SPECIES):
        n = 0.5 * budget.a_u[i]
        T = cfg.masses[i] * budget.c_u[i] / (3.0 * cfg.k * budget.a_u[i])
        values[i] = maxwellian(n, (0.0, 0.0, 0.0), T, cfg.masses[i], grid.v1, grid.v2, grid.v3, cfg.k)
    return DistributionField(values, grid)


@dataclass(frozen=True)
class SweepRecord:
    sweep: int
    distance: float
    omega_margin: float
    omega_conditions: dict
    mild_residual: float | None = None
    root_iterations: int | None = None
    root_residual: float | None = None

    def log_line(self) -> str:
        resid = "-" if self.mild_residual is None else f"{self.mild_residual:.6e}"
        parts = [f"sweep={self.sweep:4d}", f"d={self.distance:.6e}", f"mild_residual={resid}",
                 f"omega_margin={self.omega_margin:.6e}"]
        parts.extend(f"omega_{c}={v:.6e}" for c, v in sorted(self.omega_conditions.items()))
        if self.root_iterations is not None:
            parts.append(f"root_iter_max={self.root_iterations:d}")
            parts.append(f"root_residual_max={self.root_residual:.3e}")
        return " ".join(parts)


@dataclass(frozen=True)
class SolveReport:
    model: str
    iterations: int
    distances: tuple
    final_residual: float
    omega_history: tuple
    contraction_estimate: float
    converged: bool
    diverged: bool
    wall_time: float
    records: tuple = field(repr=False, default=())
    final_moments: object = field(repr=False, default=None)
    final_equilibrium: object = field(repr=False, default=None)
    message: str = ""

    @property
    def alpha_hat(self) -> float:
        return self.contraction_estimate

    @property
    def omega_passed(self) -> bool:
        return all(m > 0 for m in self.omega_history)

    def summary(self) -> dict:
        return {
            "model": self.model,
            "converged": self.converged,
            "diverged": self.diverged,
            "iterations": self.iterations,
            "final_distance": self.distances[-1] if self.distances else math.nan,
            "final_mild_residual": self.final_residual,
            "worst_omega_margin": min(self.omega_history) if self.omega_history else math.nan,
            "contraction_estimate": self.contraction_estimate,
            "wall_time_s": self.wall_time,
            "message": self.message,
        }


def tail_contraction(distances, floor: float = 1e-13) -> float:
    """Largest ratio ``d_{k+1}/d_k`` over the second half of the history.

    Steps already at round-off level (below ``floor``) are ignored.
    """
    d = np.asarray(distances, dtype=float)
    if d.size < 2:
        return math.nan
    start = max(0, d.size // 2 - 1)
    ratios = [d[k + 1] / d[k] for k in range(start, d.size - 1) if d[k] > floor and d[k + 1] > floor]
    return float(max(ratios)) if ratios else math.nan


def solve(problem: Problem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
          initial: DistributionField | None = None, relaxation: float = 1.0,
          start_sweep: int = 0, history: tuple = (), raise_on_failure: bool = False,
          on_sweep: Callable[[int, DistributionField, SweepRecord], None] | None = None):
    """Iterate ``f <- Phi(f)`` until ``d(f_{k+1}, f_k) < tol``.

    Parameters
    ----------
    problem : Problem
        Model, physics, grid and tabulated inflow.
    tol, max_iter : float, int
        Stopping rule in the metric ``d`` and sweep cap.
    initial : DistributionField, optional
        Starting iterate; defaults to :func:`initial_guess`.
    relaxation : float
        Under-relaxation ``f <- (1 - w) f + w Phi(f)``; 1 is plain Picard.
    start_sweep, history
        Sweep index and distance history of a resumed run.
    on_sweep : callable, optional
        Called as ``on_sweep(k, f_k, record)`` after every sweep.

    Returns
    -------
    (DistributionField, SolveReport)

    Raises
    ------
    EquilibriumBreakdown
        A reactive density or temperature became non-positive (the sweep
        index is attached as ``exc.sweep``); fast-model root failures are
        reported the same way.
    SolverError
        Only when ``raise_on_failure``: divergence or iteration cap.
    """
    if not 0 < relaxation <= 1:
        raise ValueError("relaxation must lie in (0, 1]")
    t0 = time.perf_counter()
    f = initial_guess(problem.f_left, problem.f_right, problem.grid) if initial is None else initial
    distances = list(history)
    records: list[SweepRecord] = []
    omega_hist: list[float] = []
    rising = _rising_run(distances)
    converged = diverged = False
    state = None
    message = ""
    k = start_sweep
    while k < max_iter:
        k += 1
        state = _guarded(apply_operator, f, problem, k)
        new = state.image
        if relaxation < 1.0:
            new = DistributionField((1.0 - relaxation) * f.values + relaxation * new.values, problem.grid)
        d = metric(new, f)
        omega = omega_membership(new, problem.budget)
        resid = None
        if k % RESIDUAL_EVERY == 0:
            resid = mild_residual_of(new, problem) if _finite(new) else math.inf
        root_it = root_res = None
        if problem.model == "fast":
            root_it = int(state.equilibrium.root_iterations.max())
            root_res = float(state.equilibrium.root_residual.max())
        rec = SweepRecord(k, d, omega.worst, omega.condition_margins(), resid, root_it, root_res)
        records.append(rec)
        log.info(rec.log_line())
        rising = rising + 1 if distances and d > distances[-1] else 0
        distances.append(d)
        omega_hist.append(omega.worst)
        f = new
        if on_sweep is not None:
            on_sweep(k, f, rec)
        if not math.isfinite(d):
            diverged = True
            message = f"non-finite distance at sweep {k}"
            break
        if d < tol:
            converged = True
            break
        if rising >= DIVERGENCE_RUN:
            diverged = True
            message = f"distance increased for {DIVERGENCE_RUN} consecutive sweeps (last d = {d:.3e} at sweep {k})"
            break
    if not converged and not diverged:
        message = f"no convergence within {max_iter} sweeps (last d = {distances[-1] if distances else math.nan:.3e})"
    final_state = _guarded(apply_operator, f, problem, k + 1) if _finite(f) else None
    final_resid = metric(f, final_state.image) if final_state is not None else math.inf
    if converged:
        message = f"converged in {k} sweeps"
    report = SolveReport(
        model=problem.model,
        iterations=k,
        distances=tuple(distances),
        final_residual=final_resid,
        omega_history=tuple(omega_hist),
        contraction_estimate=tail_contraction(distances),
        converged=converged,
        diverged=diverged,
        wall_time=time.perf_counter() - t0,
        records=tuple(records),
        final_moments=None if final_state is None else final_state.moments,
        final_equilibrium=None if final_state is None else final_state.equilibrium,
        message=message,
    )
    if raise_on_failure and not converged:
        raise SolverError(message, report)
    return f, report


def _finite(f: DistributionField) -> bool:
    return bool(np.all(np.isfinite(f.values)))


def _rising_run(distances) -> int:
    run = 0
    for a, b in zip(distances[-DIVERGENCE_RUN - 1:-1], distances[-DIVERGENCE_RUN:]):
        run = run + 1 if b > a else 0
    return run


def _guarded(fn, f, problem, sweep):
    try:
        return fn(f, problem)
    except EquilibriumBreakdown as exc:
        exc.sweep = sweep
        raise EquilibriumBreakdown(f"sweep {sweep}: {exc}", exc.species, exc.node, exc.values, sweep) from exc
    except (RootSolveError, DegenerateFieldError) as exc:
        raise EquilibriumBreakdown(f"sweep {sweep}: {exc}", sweep=sweep) from exc


# --------------------------------------------------------------------------
# contraction measurement


@dataclass(frozen=True)
class ContractionRow:
    tau: float
    alpha_hat: float
    probes: int
    rejected: int
    sweeps: int


@dataclass(frozen=True)
class ContractionTable:
    model: str
    rows: tuple

    @property
    def taus(self) -> np.ndarray:
        return np.array([r.tau for r in self.rows])

    @property
    def alphas(self) -> np.ndarray:
        return np.array([r.alpha_hat for r in self.rows])


def probe_factor(grid: PhaseGrid, delta: np.ndarray, sigma: float) -> np.ndarray:
    """``1 + delta_i cos(pi x) exp(-|v|^2 / sigma)``, shape ``(4, nodes, nv)``."""
    shape = np.cos(np.pi * grid.x)[:, None] * np.exp(-grid.speed_squared / sigma)[None, :]
    return 1.0 + np.asarray(delta)[:, None, None] * shape[None]


def contraction_ratio(problem: Problem, f: DistributionField, g: DistributionField) -> float:
    """``d(Phi f, Phi g) / d(f, g)``; NaN when ``d(f, g) = 0``."""
    denom = metric(f, g)
    if denom == 0:
        return math.nan
    return metric(apply_operator(f, problem).image, apply_operator(g, problem).image) / denom


def measure_contraction(problem: Problem, centre: DistributionField, probes: int = 8, seed: int = 0,
                        delta_max: float = 0.2, max_rejections: int = 50) -> tuple[float, int, int]:
    """Max of ``d(Phi f, Phi g) / d(f, g)`` over random admissible probe pairs near ``centre``.

    Returns ``(alpha_hat, accepted, rejected)``.  Pairs leaving the solution
    space are redrawn with half the amplitude.
    """
    rng = np.random.default_rng(seed)
    best = -math.inf
    accepted = rejected = 0
    amplitude = delta_max
    while accepted < probes:
        if rejected > max_rejections:
            raise RuntimeError(f"could not place probes inside the solution space ({rejected} rejected)")
        pair = []
        for _ in range(2):
            delta = rng.uniform(-amplitude, amplitude, SPECIES)
            sigma = rng.uniform(0.5, 4.0)
            pair.append(DistributionField(centre.values * probe_factor(problem.grid, delta, sigma), problem.grid))
        if not all(omega_membership(p, problem.budget).strictly_inside for p in pair):
            rejected += 1
            amplitude *= 0.5
            continue
        ratio = contraction_ratio(problem, *pair)
        if math.isnan(ratio):
            continue
        best = max(best, ratio)
        accepted += 1
    return best, accepted, rejected


def estimate_contraction(problem: Problem, taus, probes: int = 8, seed: int = 0,
                         tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> ContractionTable:
    """Empirical contraction factor of the solution operator for each ``tau``.

    Each ``tau`` gets its own converged solution as the probe centre; the
    probe RNG is reseeded per ``tau`` so every row sees the same perturbation
    shapes.
    """
    rows = []
    for tau in taus:
        local = problem.with_tau(float(tau))
        centre, report = solve(local, tol=tol, max_iter=max_iter)
        if not report.converged:
            raise SolverError(f"tau = {tau}: {report.message}", report)
        alpha, accepted, rejected = measure_contraction(local, centre, probes, seed)
        rows.append(ContractionRow(float(tau), alpha, accepted, rejected, report.iterations))
    return ContractionTable(problem.model, tuple(rows))


@dataclass(frozen=True)
class ContractionFit:
    """Fit of ``alpha_hat`` against ``s(tau) = (ln tau + 1) / tau``."""

    slope: float
    intercept: float
    scale: float  # geometric-mean constant C in alpha ~ C s
    spread: float  # worst factor between alpha and C s

    def explains(self, factor: float = 5.0) -> bool:
        return self.slope > 0 and self.spread <= factor


def contraction_law(tau) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    return (np.log(tau) + 1.0) / tau


def fit_contraction(taus, alphas) -> ContractionFit:
    s = contraction_law(taus)
    a = np.asarray(alphas, dtype=float)
    slope, intercept = np.polyfit(s, a, 1)
    scale = float(np.exp(np.mean(np.log(a / s))))
    ratio = a / (scale * s)
    spread = float(max(ratio.max(), 1.0 / ratio.min()))
    return ContractionFit(float(slope), float(intercept), scale, spread)
