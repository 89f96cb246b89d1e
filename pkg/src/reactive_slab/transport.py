"""Mild-solution operator: attenuated inflow plus accumulated Maxwellian source.

Along a characteristic with ``v1 > 0`` the stationary BGK equation integrates to

    f(x) = exp(-N(x) / (tau v1)) f_L + (1/(tau v1)) int_0^x exp(-(N(x) - N(y)) / (tau v1)) nu(y) M(y) dy

with ``N(x) = int_0^x nu``.  Taking the Maxwellian piecewise constant on each
cell and ``N`` piecewise linear, the integral is exact and collapses to the
one-step recursion

    f_{j+1} = a_j f_j + (1 - a_j) Mbar_j,    a_j = exp(-(N_{j+1} - N_j) / (tau |v1|)),

which is what :func:`apply_mild_operator` evaluates.  ``1 - a_j`` is formed
with ``expm1`` so it keeps full relative precision for tiny exponents.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import SPECIES, PhysicalConfig
from .fields import DistributionField, metric
from .grid import PhaseGrid
from .slow import maxwellian


@dataclass(frozen=True)
class FrequencyProfile:
    """Collision frequencies ``nu[j, i]`` at the nodes and their trapezoid cumulative ``N``."""

    nu: np.ndarray
    cumulative: np.ndarray

    @classmethod
    def from_nodes(cls, nu, x) -> "FrequencyProfile":
        nu = np.asarray(nu, dtype=float)
        x = np.asarray(x, dtype=float)
        if nu.shape != (x.size, SPECIES):
            raise ValueError(f"frequency array shape {nu.shape} does not match {x.size} nodes")
        if not np.all(np.isfinite(nu)) or np.any(nu <= 0):
            raise ValueError("collision frequencies must be positive and finite")
        steps = 0.5 * (nu[1:] + nu[:-1]) * np.diff(x)[:, None]
        cumulative = np.concatenate([np.zeros((1, SPECIES)), np.cumsum(steps, axis=0)])
        return cls(nu, cumulative)

    @property
    def increments(self) -> np.ndarray:
        """Per-cell ``N_{j+1} - N_j``, shape ``(nx, 4)``."""
        return np.diff(self.cumulative, axis=0)


@dataclass(frozen=True)
class MaxwellianField:
    """Reactive Maxwellian parameters at the nodes, per species.

    ``n`` and ``T`` are ``(nodes, 4)``, ``U`` is ``(nodes, 4, 3)``.  The fast
    model's shared velocity and temperature are broadcast to every species.
    """

    n: np.ndarray
    U: np.ndarray
    T: np.ndarray

    @classmethod
    def from_equilibrium(cls, eq) -> "MaxwellianField":
        n = np.asarray(eq.n, dtype=float)
        U = np.asarray(eq.U, dtype=float)
        T = np.asarray(eq.T, dtype=float)
        if U.ndim == n.ndim:  # shared velocity (fast model)
            U = np.broadcast_to(U[..., None, :], n.shape + (3,))
        if T.ndim == n.ndim - 1:
            T = np.broadcast_to(T[..., None], n.shape)
        for name, arr in (("n", n), ("U", U), ("T", T)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"equilibrium {name} contains non-finite values")
        return cls(n, U, T)

    def cell_averages(self) -> "MaxwellianField":
        """Parameters averaged over the two endpoints of each cell."""
        avg = lambda a: 0.5 * (a[1:] + a[:-1])  # noqa: E731
        return MaxwellianField(avg(self.n), avg(self.U), avg(self.T))


def apply_mild_operator(f_left: np.ndarray, f_right: np.ndarray, eq, freq: FrequencyProfile,
                        grid: PhaseGrid, tau: float, cfg: PhysicalConfig,
                        threads: int = 1) -> DistributionField:
    """Evaluate the mild operator for every species, node and velocity.

    ``f_left``/``f_right`` are the tabulated inflows of shape ``(4, nv)``
    (only the incoming half of each is used) and ``eq`` is any object with
    node-wise ``n``, ``U``, ``T`` (see :class:`MaxwellianField`).  With
    ``threads > 1`` species are processed concurrently; every species writes
    its own slice, so the result does not depend on the thread count.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    params = eq if isinstance(eq, MaxwellianField) else MaxwellianField.from_equilibrium(eq)
    cells = params.cell_averages()
    out = np.empty((SPECIES, grid.x.size, grid.nv))
    inv_speed = 1.0 / (tau * np.abs(grid.v1))
    dN = freq.increments  # (nx, 4)

    def work(i):
        mbar = maxwellian(cells.n[:, i], cells.U[:, i], cells.T[:, i], cfg.masses[i],
                          grid.v1, grid.v2, grid.v3, cfg.k)  # (nx, nv)
        _sweep_species(out[i], f_left[i], f_right[i], mbar, dN[:, i, None] * inv_speed)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, SPECIES)) as pool:
            list(pool.map(work, range(SPECIES)))
    else:
        for i in range(SPECIES):
            work(i)
    return DistributionField(out, grid)


def _sweep_species(row, f_left, f_right, mbar, expo):
    """Recursion along characteristics for one species, written into ``row``."""
    nodes = row.shape[0]
    # v1 is the outermost velocity axis, so each half-space is a contiguous block
    half = row.shape[1] // 2
    pos, neg = slice(half, None), slice(0, half)
    attenuation = np.exp(-expo)
    gain = -np.expm1(-expo)
    row[0, pos] = f_left[pos]
    for j in range(nodes - 1):
        row[j + 1, pos] = attenuation[j, pos] * row[j, pos] + gain[j, pos] * mbar[j, pos]
    row[nodes - 1, neg] = f_right[neg]
    for j in range(nodes - 2, -1, -1):
        row[j, neg] = attenuation[j, neg] * row[j + 1, neg] + gain[j, neg] * mbar[j, neg]


def transported_inflow(f_left: np.ndarray, f_right: np.ndarray, freq: FrequencyProfile,
                       grid: PhaseGrid, tau: float) -> np.ndarray:
    """Attenuated inflow alone (no source), shape ``(4, nodes, nv)``."""
    pos = grid.positive
    inv_speed = 1.0 / (tau * np.abs(grid.v1))
    N = freq.cumulative  # (nodes, 4)
    from_left = N.T[:, :, None]
    from_right = (N[-1] - N).T[:, :, None]
    depth = np.where(pos, from_left, from_right)
    return np.exp(-depth * inv_speed) * (f_left + f_right)[:, None, :]


def mild_residual(f: DistributionField, f_left, f_right, build_equilibrium, grid: PhaseGrid,
                  tau: float, cfg: PhysicalConfig) -> float:
    """``d(f, Phi f)``; ``build_equilibrium(f)`` returns ``(eq, FrequencyProfile)``."""
    eq, freq = build_equilibrium(f)
    return metric(f, apply_mild_operator(f_left, f_right, eq, freq, grid, tau, cfg))
