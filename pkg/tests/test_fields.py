import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reactive_slab.config import compute_boundary_budget, validate_boundary
from reactive_slab.fields import (DegenerateFieldError, DistributionField, MomentSet, defect,
                                  field_moments, global_moments, metric, omega_membership, raw_moments,
                                  species_moments, weighted_norm)
from reactive_slab.grid import build_grid
from reactive_slab.slow import maxwellian
from reactive_slab.solver import initial_guess
from conftest import make_cfg, unit_boundary

GRID = build_grid(nx=4, nv1=32, nv23=16, vmax=9.0)


def _field_of(fn, grid=GRID):
    vals = np.empty((4, grid.x.size, grid.nv))
    for i in range(4):
        for j in range(grid.x.size):
            vals[i, j] = fn(i, j)
    return DistributionField(vals, grid)


def test_field_rejects_bad_shape_and_nan():
    with pytest.raises(ValueError):
        DistributionField(np.zeros((4, 2, 3)), GRID)
    vals = np.zeros((4, GRID.x.size, GRID.nv))
    vals[0, 0, 0] = np.inf
    with pytest.raises(ValueError):
        DistributionField(vals, GRID)


def test_species_moments_maxwellian(default_grid):
    cfg = make_cfg(masses=(1, 1, 1, 1))
    g = default_grid
    vals = np.zeros((4, g.x.size, g.nv))
    vals[2, 5] = maxwellian(2.0, (0.3, 0, 0), 1.5, 1.0, g.v1, g.v2, g.v3)
    f = DistributionField(vals, g)
    n, U, T = species_moments(f, 5, 2, cfg)
    assert n == pytest.approx(2.0, rel=1e-6)
    np.testing.assert_allclose(U, [0.3, 0, 0], atol=1e-6)
    assert T == pytest.approx(1.5, rel=1e-6)
    with pytest.raises(DegenerateFieldError, match="species 1"):
        species_moments(f, 5, 0, cfg)


def test_unit_maxwellian_moments_and_norm():
    cfg = make_cfg(masses=(1, 1, 1, 1))
    g = build_grid(nx=2)
    m = maxwellian(1.0, (0, 0, 0), 1.0, 1.0, g.v1, g.v2, g.v3)
    f = _field_of(lambda i, j: m, g)
    n, U, T = species_moments(f, 0, 0, cfg)
    assert n == pytest.approx(1.0, rel=1e-9) and T == pytest.approx(1.0, rel=1e-9)
    np.testing.assert_allclose(U, 0.0, atol=1e-14)
    assert weighted_norm(m, g) == pytest.approx(4.0, rel=1e-9)
    assert weighted_norm(2 * m, g) == pytest.approx(2 * weighted_norm(m, g), rel=1e-15)
    assert weighted_norm(0 * m, g) == 0.0


def test_zero_field_degenerate():
    with pytest.raises(DegenerateFieldError):
        field_moments(DistributionField.zeros(GRID), make_cfg())


def test_global_identical_species():
    n, rho, U, T = global_moments(np.full(4, 0.7), np.tile([0.2, -0.1, 0.05], (4, 1)),
                                  np.full(4, 1.3), np.ones(4))
    assert n == pytest.approx(2.8) and rho == pytest.approx(2.8)
    np.testing.assert_allclose(U, [0.2, -0.1, 0.05], rtol=1e-15)
    assert T == pytest.approx(1.3, rel=1e-15)


def test_global_counterflow_heats():
    u = 0.4
    U = np.array([[u, 0, 0], [-u, 0, 0], [0, 0, 0], [0, 0, 0]])
    n, rho, Ug, T = global_moments(np.ones(4), U, np.ones(4), np.ones(4))
    np.testing.assert_allclose(Ug, 0.0, atol=1e-16)
    # n k T = sum n_i k T_i + (1/3) sum rho_i |U_i|^2 with n = 4
    assert T == pytest.approx(1.0 + (2 * u * u) / (3 * 4), rel=1e-15)


def test_global_single_species():
    n = np.array([1.5, 1e-300, 1e-300, 1e-300])
    U = np.array([[0.3, 0.1, 0], [0, 0, 0], [0, 0, 0], [0, 0, 0]])
    T = np.array([2.0, 1.0, 1.0, 1.0])
    _, _, Ug, Tg = global_moments(n, U, T, np.array([2.0, 3.0, 1.0, 4.0]))
    np.testing.assert_allclose(Ug, U[0], rtol=1e-12)
    assert Tg == pytest.approx(2.0, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_moment_set_invariants(seed):
    rng = np.random.default_rng(seed)
    masses = rng.uniform(0.5, 3.0, 4)
    ms = MomentSet.from_species(rng.uniform(0.1, 2, (3, 4)), rng.normal(size=(3, 4, 3)),
                                rng.uniform(0.2, 3, (3, 4)), masses, k=1.7)
    np.testing.assert_allclose(ms.rho, masses * ms.n, rtol=0)
    np.testing.assert_allclose(ms.n_total, ms.n.sum(axis=1), rtol=1e-15)
    np.testing.assert_allclose(ms.rho_total, ms.rho.sum(axis=1), rtol=1e-15)
    lhs = ms.n_total * ms.k * ms.T_total
    kin = np.sum(ms.rho * (np.sum(ms.U**2, axis=-1) - np.sum(ms.U_total**2, axis=-1)[:, None]), axis=1)
    rhs = np.sum(ms.n * ms.k * ms.T, axis=1) + kin / 3
    np.testing.assert_allclose(lhs, rhs, rtol=1e-13)
    one = ms.at(1)
    assert one.n.shape == (4,) and one.T_total == ms.T_total[1]


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_metric_is_pseudometric(seed):
    rng = np.random.default_rng(seed)
    shape = (4, GRID.x.size, GRID.nv)
    f, g, h = (DistributionField(rng.random(shape), GRID) for _ in range(3))
    assert metric(f, f) == 0.0
    assert metric(f, g) >= 0.0
    assert metric(f, g) == metric(g, f)
    assert metric(f, h) <= metric(f, g) + metric(g, h) + 1e-12


def test_metric_against_zero():
    rng = np.random.default_rng(3)
    f = DistributionField(rng.random((4, GRID.x.size, GRID.nv)), GRID)
    expected = sum(max(weighted_norm(f.values[i, j], GRID) for j in range(GRID.x.size)) for i in range(4))
    assert metric(f, DistributionField.zeros(GRID)) == pytest.approx(expected, rel=1e-14)


def test_metric_grid_mismatch():
    other = build_grid(nx=4, nv1=32, nv23=16, vmax=8.0)
    with pytest.raises(ValueError, match="different grids"):
        metric(DistributionField.zeros(GRID), DistributionField.zeros(other))


@settings(max_examples=25, deadline=None)
@given(n=st.floats(0.2, 3.0), u=st.floats(-0.5, 0.5), r=st.floats(0.8, 2.0), m=st.sampled_from([1.0, 1.5]))
def test_moment_maxwellian_closure(n, u, r, m):
    # kT/m = r stays where the default transverse axes resolve the Gaussian
    T = r * m
    cfg = make_cfg(masses=(m, 2.0, 1.0, m + 1.0))
    g = build_grid(nx=2)
    f = _field_of(lambda i, j: maxwellian(n, (u, 0, 0), T, cfg.masses[i], g.v1, g.v2, g.v3), g)
    n1, U1, T1 = species_moments(f, 0, 0, cfg)
    again = _field_of(lambda i, j: maxwellian(n1, U1, T1, cfg.masses[i], g.v1, g.v2, g.v3), g)
    n2, U2, T2 = species_moments(again, 0, 0, cfg)
    assert n2 == pytest.approx(n1, rel=1e-8) and T2 == pytest.approx(T1, rel=1e-8)
    np.testing.assert_allclose(U2, U1, atol=1e-8)


def test_defect_reflection_invariant():
    rng = np.random.default_rng(11)
    vals = rng.random(GRID.nv)
    flipped = vals.reshape(GRID.shape)[::-1].ravel()
    d0, fl0, e0 = raw_moments(vals, GRID)
    d1, fl1, e1 = raw_moments(flipped, GRID)
    assert defect(d0, fl0[0], e0) == pytest.approx(defect(d1, fl1[0], e1), rel=1e-13)
    assert fl1[0] == pytest.approx(-fl0[0], rel=1e-12)


def test_omega_initial_guess_inside(default_grid):
    cfg = make_cfg()
    bd = unit_boundary()
    budget = compute_boundary_budget(bd, cfg, default_grid)
    fl, fr = validate_boundary(bd, default_grid, cfg)
    f0 = initial_guess(fl, fr, default_grid)
    rep = omega_membership(f0, budget)
    assert rep.passed
    margins = rep.condition_margins()
    assert set(margins) == {"A", "B", "C"}
    assert margins["B"] > 0 and margins["C"] > 0


def test_omega_zero_field_fails_density():
    cfg = make_cfg()
    budget = compute_boundary_budget(unit_boundary(), cfg, GRID)
    rep = omega_membership(DistributionField.zeros(GRID), budget)
    assert not rep.passed
    np.testing.assert_allclose(rep.density, -budget.a_l)


def test_omega_negative_node_fails_nonnegativity():
    cfg = make_cfg()
    budget = compute_boundary_budget(unit_boundary(), cfg, GRID)
    m = maxwellian(1.0, (0, 0, 0), 1.0, 1.0, GRID.v1, GRID.v2, GRID.v3)
    f = _field_of(lambda i, j: m)
    vals = f.values.copy()
    vals[1, 2, 7] = -1e-3
    rep = omega_membership(DistributionField(vals, GRID), budget)
    assert rep.nonnegativity[1] == -1e-3 and not rep.passed
    assert rep.condition_margins()["A"] == -1e-3
