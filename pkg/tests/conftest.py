from __future__ import annotations

import functools
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from reactive_slab.config import (BoundaryData, HalfMaxwellian, PhysicalConfig,  # noqa: E402
                                  budget_from_moments)
from reactive_slab.fields import MomentSet  # noqa: E402
from reactive_slab.grid import build_grid  # noqa: E402
from reactive_slab.solver import Problem, solve  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
EXAMPLES = ROOT / "examples"


def make_cfg(masses=(2.0, 3.0, 1.0, 4.0), delta_e=1.0, chi=0.5, nu=1.0, nu_forward=0.1,
             nu_backward=0.1, tau=100.0, k=1.0) -> PhysicalConfig:
    nu_m = np.full((4, 4), nu) if np.isscalar(nu) else np.asarray(nu)
    chi_m = np.full((4, 4), chi) if np.isscalar(chi) else np.asarray(chi)
    return PhysicalConfig(np.asarray(masses, float), np.array([0.0, 0.0, delta_e / 2, delta_e / 2]),
                          chi_m, nu_m, nu_forward, nu_backward, tau, k)


def unit_boundary() -> BoundaryData:
    return BoundaryData.uniform(HalfMaxwellian(1.0, 0.0, 1.0))


@pytest.fixture
def cfg():
    return make_cfg()


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(nx=8, nv1=16, nv23=8, vmax=8.0)


@pytest.fixture(scope="session")
def default_grid():
    return build_grid()


@functools.lru_cache(maxsize=None)
def cached_problem(model: str, tau: float = 100.0, nu_forward: float = 0.1, nu_backward: float = 0.1,
                   grid_key: str = "default") -> Problem:
    grid = build_grid() if grid_key == "default" else build_grid(nx=8, nv1=16, nv23=8, vmax=8.0)
    cfg = make_cfg(nu_forward=nu_forward, nu_backward=nu_backward, tau=tau)
    return Problem.build(model, cfg, unit_boundary(), grid)


@functools.lru_cache(maxsize=None)
def cached_solve(model: str, tau: float = 100.0, grid_key: str = "default"):
    """Converged solution (and per-sweep Omega reports) shared across test modules."""
    from reactive_slab.fields import omega_membership

    problem = cached_problem(model, tau, grid_key=grid_key)
    reports = []
    field, report = solve(problem, tol=1e-10, max_iter=500,
                          on_sweep=lambda k, f, rec: reports.append(omega_membership(f, problem.budget)))
    return problem, field, report, tuple(reports)


# --------------------------------------------------------------------------
# random admissible inputs


def random_masses(rng) -> np.ndarray:
    M = rng.uniform(2.0, 8.0)
    m1 = rng.uniform(0.15, 0.85) * M
    m3 = rng.uniform(0.15, 0.85) * M
    return np.array([m1, M - m1, m3, M - m3])


def random_physics(rng, nu_forward=None, nu_backward=None, delta_e=None) -> PhysicalConfig:
    masses = random_masses(rng)
    nu = rng.uniform(0.5, 2.0, (4, 4))
    chi = nu * rng.uniform(0.0, 1.0, (4, 4))
    return PhysicalConfig(
        masses, np.array([0.0, 0.0, 0.5, 0.5]) * (rng.uniform(0.2, 3.0) if delta_e is None else delta_e),
        chi, nu,
        rng.uniform(0.0, 2.0) if nu_forward is None else nu_forward,
        rng.uniform(0.0, 2.0) if nu_backward is None else nu_backward,
        100.0,
    )


def random_moments(rng, cfg: PhysicalConfig, common=False, x_range=(0.1, 5.0)) -> MomentSet:
    """Moment set with ``Delta E / k T`` inside ``x_range``."""
    while True:
        n = rng.uniform(0.2, 2.0, 4)
        U = np.zeros((4, 3)) + (rng.uniform(-0.5, 0.5, 3) if common else rng.uniform(-0.5, 0.5, (4, 3)))
        T = np.full(4, rng.uniform(0.3, 3.0)) if common else rng.uniform(0.3, 3.0, 4)
        ms = MomentSet.from_species(n, U, T, cfg.masses, cfg.k)
        x = cfg.delta_e / (cfg.k * ms.T_total)
        if x_range[0] <= x <= x_range[1]:
            return ms


def synthetic_budget(cfg, a_u=2.0, c_u=6.0, gamma=0.01):
    return budget_from_moments(np.full(4, a_u), np.full(4, 1.0), np.full(4, c_u), np.full(4, 1.0),
                               np.full(4, gamma), cfg)


# --------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per criterion in the terminal report

ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
