"""Distribution fields on the phase grid, their moments, norm and metric."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SPECIES, BoundaryBudget, PhysicalConfig
from .grid import PhaseGrid, integrate


class DegenerateFieldError(ValueError):
    pass


@dataclass(frozen=True)
class DistributionField:
    """Species distributions ``values[i, j, :] = f_i(x_j, v)``."""

    values: np.ndarray
    grid: PhaseGrid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        expected = (SPECIES, self.grid.x.size, self.grid.nv)
        if v.shape != expected:
            raise ValueError(f"field shape {v.shape} does not match grid {expected}")
        if not np.all(np.isfinite(v)):
            raise ValueError("distribution field contains non-finite values")
        object.__setattr__(self, "values", v)

    def __sub__(self, other: "DistributionField") -> "DistributionField":
        _check_same_grid(self, other)
        return DistributionField(self.values - other.values, self.grid)

    def scaled(self, factor) -> "DistributionField":
        return DistributionField(self.values * factor, self.grid)

    @classmethod
    def zeros(cls, grid: PhaseGrid) -> "DistributionField":
        return cls(np.zeros((SPECIES, grid.x.size, grid.nv)), grid)


def _check_same_grid(f: DistributionField, g: DistributionField):
    if f.grid is not g.grid and not f.grid.same_as(g.grid):
        raise ValueError("fields live on different grids")


@dataclass(frozen=True)
class MomentSet:
    """Species and global moments; leading axes index spatial nodes.

    Shapes: ``n, rho, T`` are ``(..., 4)``, ``U`` is ``(..., 4, 3)``; the global
    fields drop the species axis.
    """

    n: np.ndarray
    U: np.ndarray
    T: np.ndarray
    masses: np.ndarray
    k: float
    n_total: np.ndarray
    rho_total: np.ndarray
    U_total: np.ndarray
    T_total: np.ndarray

    @property
    def rho(self) -> np.ndarray:
        return self.masses * self.n

    @classmethod
    def from_species(cls, n, U, T, masses, k: float = 1.0) -> "MomentSet":
        n = np.asarray(n, dtype=float)
        U = np.asarray(U, dtype=float)
        T = np.asarray(T, dtype=float)
        masses = np.asarray(masses, dtype=float)
        n_total, rho_total, U_total, T_total = global_moments(n, U, T, masses, k)
        return cls(n, U, T, masses, float(k), n_total, rho_total, U_total, T_total)

    def at(self, index) -> "MomentSet":
        """Moments at one spatial node (or any leading-axis index)."""
        return MomentSet(self.n[index], self.U[index], self.T[index], self.masses, self.k,
                         self.n_total[index], self.rho_total[index], self.U_total[index],
                         self.T_total[index])


def global_moments(n, U, T, masses, k: float = 1.0):
    """Mixture density, mass density, bulk velocity and temperature.

    ``n k T = sum_i n_i k T_i + (1/3) sum_i rho_i (|U_i|^2 - |U|^2)``.
    """
    n = np.asarray(n, dtype=float)
    U = np.asarray(U, dtype=float)
    T = np.asarray(T, dtype=float)
    rho_i = masses * n
    n_total = n.sum(axis=-1)
    rho_total = rho_i.sum(axis=-1)
    U_total = np.einsum("...i,...id->...d", rho_i, U) / rho_total[..., None]
    kinetic = rho_i * (np.sum(U * U, axis=-1) - np.sum(U_total * U_total, axis=-1)[..., None])
    T_total = (np.sum(n * T, axis=-1) + kinetic.sum(axis=-1) / (3.0 * k)) / n_total
    return n_total, rho_total, U_total, T_total


def raw_moments(values: np.ndarray, grid: PhaseGrid):
    """``(int f, int v f, int |v|^2 f)`` over the velocity axis."""
    density = integrate(values, grid)
    flux = np.stack([integrate(values * c, grid) for c in (grid.v1, grid.v2, grid.v3)], axis=-1)
    energy = integrate(values * grid.speed_squared, grid)
    return density, flux, energy


def _species_moments_array(values: np.ndarray, grid: PhaseGrid, mass, k: float):
    """Vectorised ``(n, U, T)`` for ``values`` of shape ``(..., nv)``."""
    density = integrate(values, grid)
    if np.any(~(density > 0)):
        raise DegenerateFieldError("species density is not positive at some node")
    U = np.stack([integrate(values * c, grid) for c in (grid.v1, grid.v2, grid.v3)], axis=-1)
    U = U / density[..., None]
    dev = ((grid.v1 - U[..., 0:1]) ** 2 + (grid.v2 - U[..., 1:2]) ** 2
           + (grid.v3 - U[..., 2:3]) ** 2)
    T = mass * integrate(values * dev, grid) / (3.0 * k * density)
    return density, U, T


def species_moments(f: DistributionField, x_index: int, species: int, cfg: PhysicalConfig):
    """``(n, U, T)`` of species ``species`` (0-based) at spatial node ``x_index``."""
    try:
        n, U, T = _species_moments_array(f.values[species, x_index], f.grid, cfg.masses[species], cfg.k)
    except DegenerateFieldError as exc:
        raise DegenerateFieldError(f"species {species + 1} has non-positive density at x-node {x_index}") from exc
    return float(n), U, float(T)


def field_moments(f: DistributionField, cfg: PhysicalConfig) -> MomentSet:
    """Moments of every species at every spatial node; leading axis is ``x``."""
    n = np.empty((f.grid.x.size, SPECIES))
    U = np.empty((f.grid.x.size, SPECIES, 3))
    T = np.empty((f.grid.x.size, SPECIES))
    for i in range(SPECIES):
        try:
            n[:, i], U[:, i], T[:, i] = _species_moments_array(f.values[i], f.grid, cfg.masses[i], cfg.k)
        except DegenerateFieldError as exc:
            raise DegenerateFieldError(f"species {i + 1} has non-positive density somewhere") from exc
    return MomentSet.from_species(n, U, T, cfg.masses, cfg.k)


def weighted_norm(values: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """``int |f| (1 + |v|^2) dv`` over the last axis."""
    return integrate(np.abs(values) * (1.0 + grid.speed_squared), grid)


def metric(f: DistributionField, g: DistributionField) -> float:
    """``sum_i max_x || f_i - g_i ||``, the solver's distance between fields."""
    _check_same_grid(f, g)
    norms = weighted_norm(f.values - g.values, f.grid)
    return float(np.sum(np.max(norms, axis=1)))


@dataclass(frozen=True)
class OmegaReport:
    """Worst margins of the three membership conditions, per species.

    ``nonnegativity`` is the minimum value of ``f_i``; ``density`` and
    ``energy`` are the smallest distance to either end of the budget bracket;
    ``defect`` is ``min_x [(int f)(int |v|^2 f) - (int v1 f)^2] - gamma_l``.
    """

    nonnegativity: np.ndarray
    density: np.ndarray
    energy: np.ndarray
    defect: np.ndarray

    @property
    def worst(self) -> float:
        return float(min(self.nonnegativity.min(), self.density.min(), self.energy.min(), self.defect.min()))

    @property
    def passed(self) -> bool:
        return bool(np.all(self.nonnegativity >= 0) and np.all(self.density >= 0)
                    and np.all(self.energy >= 0) and np.all(self.defect >= 0))

    @property
    def strictly_inside(self) -> bool:
        return bool(np.all(self.nonnegativity > 0) and np.all(self.density > 0)
                    and np.all(self.energy > 0) and np.all(self.defect > 0))

    def condition_margins(self) -> dict:
        return {
            "A": float(self.nonnegativity.min()),
            "B": float(min(self.density.min(), self.energy.min())),
            "C": float(self.defect.min()),
        }


def defect(density, flux_v1, energy):
    """Cauchy-Schwarz defect ``(int f)(int |v|^2 f) - (int v1 f)^2``."""
    return density * energy - flux_v1**2


def omega_membership(f: DistributionField, budget: BoundaryBudget) -> OmegaReport:
    values = f.values
    grid = f.grid
    density = integrate(values, grid)  # (4, nx+1)
    energy = integrate(values * grid.speed_squared, grid)
    flux_v1 = integrate(values * grid.v1, grid)
    a_l, a_u = budget.a_l[:, None], budget.a_u[:, None]
    c_l, c_u = budget.c_l[:, None], budget.c_u[:, None]
    return OmegaReport(
        nonnegativity=values.min(axis=(1, 2)),
        density=np.minimum(density - a_l, a_u - density).min(axis=1),
        energy=np.minimum(energy - c_l, c_u - energy).min(axis=1),
        defect=(defect(density, flux_v1, energy) - budget.gamma_min).min(axis=1),
    )
