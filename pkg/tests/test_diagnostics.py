import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reactive_slab.config import budget_from_moments
from reactive_slab.diagnostics import (BoundCheck, BoundReport, _exp, _mul, check_species_bounds,
                                       fast_density_sandwich, frequency_brackets_fast, frequency_brackets_slow,
                                       full_bound_report, slow_density_bounds, species_bound_values)
from reactive_slab.fields import MomentSet
from reactive_slab.slow import EquilibriumBreakdown, slow_equilibrium
from reactive_slab.solver import Problem, solve
from reactive_slab.grid import build_grid
from conftest import make_cfg, random_physics, synthetic_budget, unit_boundary

SMALL = build_grid(nx=8, nv1=16, nv23=8, vmax=8.0)


def test_unit_budget_formula_values():
    cfg = make_cfg(masses=(3, 3, 3, 3))
    b = budget_from_moments(np.ones(4), np.ones(4), np.ones(4), np.ones(4), np.ones(4), cfg)
    v = species_bound_values(b, cfg)
    # a_l = c_l = 1/8: |U| <= (1 + 1)/(2/8), T in [3/(3*1), 3*1/(3/8)]
    np.testing.assert_array_equal(v["velocity"], 8.0)
    np.testing.assert_array_equal(v["temperature_lower"], 1.0)
    np.testing.assert_array_equal(v["temperature_upper"], 8.0)


def test_bounds_reproduced_digit_exact():
    rng = np.random.default_rng(0)
    cfg = random_physics(rng, nu_forward=0.3, nu_backward=0.2)
    b = budget_from_moments(*(rng.uniform(0.5, 3, 4) for _ in range(5)), cfg)
    v = species_bound_values(b, cfg)
    for i in range(4):
        assert v["velocity"][i] == (b.a_u[i] + b.c_u[i]) / (2 * b.a_l[i])
        assert v["temperature_lower"][i] == cfg.masses[i] * b.gamma_min / (3 * cfg.k * b.a_u[i] ** 2)
        assert v["temperature_upper"][i] == cfg.masses[i] * b.c_u[i] / (3 * cfg.k * b.a_l[i])
    nu_m, nu_M = frequency_brackets_fast(b, cfg)
    assert nu_m[0] == pytest.approx(sum(cfg.nu[0, j] * b.a_l[j] for j in range(4)), rel=1e-15)
    back = (cfg.mu34 / cfg.mu12) ** 1.5 * cfg.nu_backward
    assert nu_M[2] == pytest.approx(sum(cfg.nu[2, j] * b.a_u[j] for j in range(4)) + cfg.nu_backward * b.a_u[3],
                                    rel=1e-15)
    assert nu_M[0] == pytest.approx(sum(cfg.nu[0, j] * b.a_u[j] for j in range(4)) + back * b.a_u[1], rel=1e-15)


def test_overflow_saturates_without_nan():
    assert _exp(1e4) == math.inf and _mul(0.0, math.inf) == 0.0
    cfg = make_cfg(nu_forward=0.0, delta_e=50.0)
    b = synthetic_budget(cfg, gamma=1e-6)
    lo, hi = frequency_brackets_slow(b, cfg)
    assert np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))
    n_lo, n_hi = slow_density_bounds(b, cfg)
    np.testing.assert_array_equal(n_lo, 0.0)
    assert np.all(np.isfinite(n_hi))


def test_report_api():
    c1 = BoundCheck("a", 1, "upper", 1.0, 0.5, 0.5, True)
    c2 = BoundCheck("b", None, "lower", 1.0, 0.5, -0.5, False)
    rep = BoundReport((c1,)) + BoundReport((c2,))
    assert not rep.passed and rep.failures() == [c2]
    assert rep.find("b") is c2
    with pytest.raises(KeyError):
        rep.find("a", 2)
    table = rep.to_table().splitlines()
    assert table[0].split()[:3] == ["bound", "sp", "kind"] and table[2].endswith("FAIL")


def test_violating_moments_flagged():
    cfg = make_cfg()
    b = synthetic_budget(cfg)
    cold = MomentSet.from_species(np.ones(4), np.zeros((4, 3)), np.full(4, 1e-9), cfg.masses)
    rep = check_species_bounds(cold, b, cfg)
    assert not rep.passed
    assert {c.name for c in rep.failures()} == {"species_temperature"}
    assert all(c.kind == "lower" for c in rep.failures())


@pytest.mark.parametrize("model", ["slow", "fast"])
def test_converged_solution_passes_all_bounds(model):
    cfg = make_cfg(nu_forward=0.05, nu_backward=0.05)
    p = Problem.build(model, cfg, unit_boundary(), SMALL)
    f, rep = solve(p, tol=1e-10)
    assert rep.converged
    bounds = full_bound_report(rep.final_moments, rep.final_equilibrium, p.budget, cfg, model)
    assert bounds.passed, bounds.to_table()
    if model == "fast":
        assert bounds.find("frequency", 3).passed and bounds.find("reactive_density_sandwich", 1).passed
    with pytest.raises(ValueError):
        full_bound_report(rep.final_moments, rep.final_equilibrium, p.budget, cfg, "medium")


def test_slow_without_reaction_keeps_densities():
    cfg = make_cfg(nu_forward=0.0)
    b = synthetic_budget(cfg)
    ms = MomentSet.from_species(np.array([0.5, 1.0, 1.5, 0.7]), np.zeros((4, 3)), np.full(4, 1.0), cfg.masses)
    eq = slow_equilibrium(ms, cfg)
    np.testing.assert_array_equal(eq.n, ms.n)
    n_lo, n_hi = slow_density_bounds(b, cfg)
    assert np.all(n_lo <= eq.n) and np.all(eq.n <= n_hi)


def _admissible_moments(rng, cfg, b):
    n = rng.uniform(b.a_min, b.a_max, 4)
    T = rng.uniform(b.temperature_lower, b.temperature_upper, 4)
    dirs = rng.normal(size=(4, 3))
    U = dirs / np.linalg.norm(dirs, axis=1)[:, None] * rng.uniform(0, 0.5, (4, 1))
    return MomentSet.from_species(n, U, T, cfg.masses, cfg.k)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_slow_equilibrium_within_budget_bounds(seed):
    rng = np.random.default_rng(seed)
    cfg = random_physics(rng, nu_forward=rng.uniform(0, 0.01))
    b = synthetic_budget(cfg, a_u=2.0, c_u=6.0, gamma=0.5)
    ms = _admissible_moments(rng, cfg, b)
    if not b.temperature_lower <= ms.T_total <= b.temperature_upper:
        return
    nu_lo, nu_hi = frequency_brackets_slow(b, cfg)
    n_lo, n_hi = slow_density_bounds(b, cfg)
    try:
        eq = slow_equilibrium(ms, cfg)
    except EquilibriumBreakdown:
        return
    assert np.all(nu_lo <= eq.nu) and np.all(eq.nu <= nu_hi)
    assert np.all(n_lo <= eq.n * (1 + 1e-12)) and np.all(eq.n <= n_hi)


def test_sandwich_ordered():
    cfg = make_cfg()
    lo, hi = fast_density_sandwich(synthetic_budget(cfg), cfg)
    assert 0 < lo < hi


def test_steep_extreme_functional_uses_resolution_root():
    from reactive_slab.fast import LogFunctional, RootSolveError, equilibrium_target, solve_monotone
    cfg = make_cfg(nu_forward=0.05, nu_backward=0.05)
    p = Problem.build("fast", cfg, unit_boundary(), SMALL)
    b = p.budget
    nu_m, nu_M = frequency_brackets_fast(b, cfg)
    steep = LogFunctional.from_slots(b.a_l, b.a_u, nu_m, nu_M, b.temperature_lower, 0.0, cfg)
    target = equilibrium_target(cfg)
    with pytest.raises(RootSolveError, match="machine resolution"):
        solve_monotone(steep, target, 1e-10)
    res = solve_monotone(steep, target, 1e-10, accept_resolution=True)
    z = res.root
    step = 4 * np.spacing(z)
    assert steep(z - step) < target < steep(z + step)
