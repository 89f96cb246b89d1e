"""Reactive equilibrium for the slow-reaction BGK model.

All functions broadcast over leading (spatial) axes of a :class:`MomentSet`;
the species axis is always the last one (``(..., 4)``, or ``(..., 4, 3)`` for
velocities).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcx

from .config import LAMBDA, PhysicalConfig
from .fields import MomentSet

SQRT_PI = math.sqrt(math.pi)


class EquilibriumBreakdown(ArithmeticError):
    """Reactive density or temperature came out non-positive."""

    def __init__(self, message: str, species: int | None = None, node=None, values=None,
                 sweep: int | None = None):
        super().__init__(message)
        self.species = species
        self.node = node
        self.values = values
        self.sweep = sweep


def incomplete_gamma_32(x):
    """Upper incomplete gamma ``Gamma(3/2, x) = sqrt(pi)/2 erfc(sqrt x) + sqrt(x) e^{-x}``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ValueError("Gamma(3/2, x) needs x >= 0")
    s = np.sqrt(x)
    out = 0.5 * SQRT_PI * erfc(s) + s * np.exp(-x)
    return out if out.ndim else float(out)


def incomplete_gamma_32_scaled(x):
    """``Gamma(3/2, x) e^x``, finite for large ``x``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ValueError("Gamma(3/2, x) needs x >= 0")
    s = np.sqrt(x)
    out = 0.5 * SQRT_PI * erfcx(s) + s
    return out if out.ndim else float(out)


def maxwellian(n, U, T, m, v1, v2, v3, k: float = 1.0):
    """``n (m / 2 pi k T)^{3/2} exp(-m |v - U|^2 / 2 k T)``.

    Parameters broadcast against each other; when the velocity arguments are
    arrays a trailing velocity axis is appended to the result.
    """
    n = np.asarray(n, dtype=float)
    T = np.asarray(T, dtype=float)
    U = np.asarray(U, dtype=float)
    m = np.asarray(m, dtype=float)
    if np.any(~(n > 0)) or np.any(~(T > 0)):
        raise ValueError("Maxwellian needs positive density and temperature")
    v1, v2, v3 = (np.asarray(c, dtype=float) for c in (v1, v2, v3))
    if v1.ndim:
        def expand(a):
            return a[..., None]
    else:
        def expand(a):
            return a
    beta = m / (2.0 * k * T)
    dev = (v1 - expand(U[..., 0])) ** 2 + (v2 - expand(U[..., 1])) ** 2 + (v3 - expand(U[..., 2])) ** 2
    return expand(n * (beta / math.pi) ** 1.5) * np.exp(-expand(beta) * dev)


def _threshold_ratio(moments: MomentSet, cfg: PhysicalConfig):
    return cfg.delta_e / (cfg.k * moments.T_total)


def _elastic(moments: MomentSet, cfg: PhysicalConfig):
    return np.einsum("ij,...j->...i", cfg.nu, moments.n)


def slow_frequencies(moments: MomentSet, cfg: PhysicalConfig) -> np.ndarray:
    """Collision frequencies ``nu_i`` of the slow-reaction model, shape ``(..., 4)``."""
    if np.any(~(moments.n > 0)) or np.any(~(moments.T_total > 0)):
        raise ValueError("slow_frequencies needs positive densities and temperature")
    x = _threshold_ratio(moments, cfg)
    g = 2.0 / SQRT_PI * incomplete_gamma_32(x)
    # (2/sqrt pi) Gamma(3/2, x) e^x (mu12/mu34)^{3/2}, kept finite for large x
    g_back = 2.0 / SQRT_PI * incomplete_gamma_32_scaled(x) * (cfg.mu12 / cfg.mu34) ** 1.5
    n = moments.n
    partner = np.stack([n[..., 1], n[..., 0], n[..., 3], n[..., 2]], axis=-1)
    factor = np.stack([g, g, g_back, g_back], axis=-1)
    return _elastic(moments, cfg) + cfg.nu_forward * factor * partner


def reaction_source(moments: MomentSet, cfg: PhysicalConfig):
    """Net reaction rate ``S`` (positive when ``3 + 4 -> 1 + 2`` dominates)."""
    x = _threshold_ratio(moments, cfg)
    n = moments.n
    ratio = (cfg.masses[0] * cfg.masses[1] / (cfg.masses[2] * cfg.masses[3])) ** 1.5
    backward = n[..., 2] * n[..., 3] * ratio * incomplete_gamma_32_scaled(x)
    forward = n[..., 0] * n[..., 1] * incomplete_gamma_32(x)
    return cfg.nu_forward * 2.0 / SQRT_PI * (backward - forward)


@dataclass(frozen=True)
class SlowEquilibrium:
    nu: np.ndarray
    source: np.ndarray
    n: np.ndarray
    U: np.ndarray
    T: np.ndarray
    moments: MomentSet


def exchange_terms(moments: MomentSet, cfg: PhysicalConfig):
    """Elastic momentum and energy exchange sums (without the ``1/nu_i`` factor).

    Returns ``(P, Q_T, Q_U)`` with
    ``P_i = 2 sum_j chi_ij mu_ij n_i n_j (U_j - U_i)``,
    ``Q_T_i = 6k sum_j chi_ij mu_ij/(m_i+m_j) n_i n_j (T_j - T_i)`` and
    ``Q_U_i = 2 sum_j chi_ij mu_ij/(m_i+m_j) n_i n_j (m_i U_i + m_j U_j).(U_j - U_i)``.
    """
    m = cfg.masses
    mu = cfg.reduced_masses
    n, U, T = moments.n, moments.U, moments.T
    nn = n[..., :, None] * n[..., None, :]
    dU = U[..., None, :, :] - U[..., :, None, :]  # [i, j] -> U_j - U_i
    coupling = cfg.chi * mu * nn
    P = 2.0 * np.einsum("...ij,...ijd->...id", coupling, dU)
    weight = coupling / (m[:, None] + m[None, :])
    dT = T[..., None, :] - T[..., :, None]
    Q_T = 6.0 * cfg.k * np.sum(weight * dT, axis=-1)
    mom = m[:, None, None] * U[..., :, None, :] + m[None, :, None] * U[..., None, :, :]
    Q_U = 2.0 * np.sum(weight * np.sum(mom * dU, axis=-1), axis=-1)
    return P, Q_T, Q_U


def slow_parameters(moments: MomentSet, nu, source, cfg: PhysicalConfig) -> SlowEquilibrium:
    """Reactive Maxwellian parameters ``(n_i, U_i, T_i)`` of the slow model."""
    nu = np.asarray(nu, dtype=float)
    source = np.asarray(source, dtype=float)
    if np.any(~(nu > 0)) or np.any(~(moments.n > 0)):
        raise ValueError("slow_parameters needs positive frequencies and densities")
    m, k, M = cfg.masses, cfg.k, cfg.total_mass
    lam = LAMBDA
    n0, U0, T0 = moments.n, moments.U, moments.T
    S = source[..., None]
    shift = lam * S / nu
    n = n0 + shift

    P, Q_T, Q_U = exchange_terms(moments, cfg)
    momentum = (m[:, None] * n0[..., None] * U0 + P / nu[..., None]
                + shift[..., None] * m[:, None] * moments.U_total[..., None, :])

    x = cfg.delta_e / (k * moments.T_total)
    T_glob = moments.T_total[..., None]
    tail = x ** 1.5 / incomplete_gamma_32_scaled(x)  # x^{3/2} e^{-x} / Gamma(3/2, x)
    mass_frac = (M - m) / M
    reactive = (0.5 * m * np.sum(moments.U_total**2, axis=-1)[..., None] + 1.5 * k * T_glob
                + mass_frac * k * T_glob * tail[..., None]
                - 0.5 * (1.0 - lam) * mass_frac * cfg.delta_e)

    bad_n = ~(n > 0)
    if np.any(bad_n):
        _breakdown("density", bad_n, n)
    U = momentum / (m[:, None] * n[..., None])
    energy = (1.5 * n0 * k * T0 - 0.5 * m * (n * np.sum(U * U, axis=-1) - n0 * np.sum(U0 * U0, axis=-1))
              + Q_T / nu + Q_U / nu + shift * reactive)
    T = energy / (1.5 * n * k)
    bad_T = ~(T > 0)
    if np.any(bad_T):
        _breakdown("temperature", bad_T, T)
    return SlowEquilibrium(nu, source, n, U, T, moments)


def _breakdown(what: str, mask: np.ndarray, values: np.ndarray):
    idx = np.argwhere(mask)[0]
    species = int(idx[-1])
    node = tuple(int(i) for i in idx[:-1])
    where = f" at node {node[0] if len(node) == 1 else node}" if node else ""
    raise EquilibriumBreakdown(
        f"equilibrium breakdown: reactive {what} of species {species + 1} is "
        f"{values[tuple(idx)]:.6g}{where} (reaction rate too large or moments outside the admissible set)",
        species=species, node=node, values=values,
    )


def slow_equilibrium(moments: MomentSet, cfg: PhysicalConfig) -> SlowEquilibrium:
    nu = slow_frequencies(moments, cfg)
    source = reaction_source(moments, cfg)
    return slow_parameters(moments, nu, source, cfg)
