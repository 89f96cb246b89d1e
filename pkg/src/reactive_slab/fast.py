"""Reactive equilibrium for the fast-reaction BGK model.

The density of species 1 in the reactive Maxwellian is the root of a scalar
equation.  We solve it in log form,

    L(z) = log(eta3 eta4 / (eta1 eta2)) + log(eta1 z) + log(eta2 n2 + eta1 (z - n1))
           - log(eta3 n3 - eta1 (z - n1)) - log(eta4 n4 - eta1 (z - n1))
           - dE / (k F(z))  =  (3/2) log(mu12 / mu34),

which is strictly increasing on its constraint interval and diverges to
``-inf``/``+inf`` at the two ends.  :class:`LogFunctional` also accepts
independent values for every argument slot, which is what the budget-extreme
sandwich bounds for the root need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import LAMBDA, PhysicalConfig
from .fields import MomentSet

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 200
BRACKET_MARGIN = 1e-12


class RootSolveError(ArithmeticError):
    pass


def fast_frequencies(moments: MomentSet, cfg: PhysicalConfig) -> np.ndarray:
    """Collision frequencies of the fast-reaction model, shape ``(..., 4)``."""
    if np.any(~(moments.n > 0)) or np.any(~(moments.T_total > 0)):
        raise ValueError("fast_frequencies needs positive densities and temperature")
    n = moments.n
    elastic = np.einsum("ij,...j->...i", cfg.nu, n)
    x = cfg.delta_e / (cfg.k * moments.T_total)
    g = (cfg.mu34 / cfg.mu12) ** 1.5 * np.exp(-x)
    one = np.ones_like(g)
    partner = np.stack([n[..., 1], n[..., 0], n[..., 3], n[..., 2]], axis=-1)
    factor = np.stack([g, g, one, one], axis=-1)
    return elastic + cfg.nu_backward * factor * partner


def reactive_velocity(moments: MomentSet, nu_t, cfg: PhysicalConfig) -> np.ndarray:
    """Frequency-and-mass weighted mean of the species velocities."""
    w = np.asarray(nu_t) * cfg.masses * moments.n
    return np.einsum("...i,...id->...d", w, moments.U) / np.sum(w, axis=-1)[..., None]


def _thermal_sum(moments: MomentSet, nu_t, U_t, cfg: PhysicalConfig) -> float:
    """``sum_i nu_i n_i [m_i (|U_i|^2 - |U~|^2)/2 + 3 k T_i / 2]`` (printed form)."""
    kinetic = 0.5 * cfg.masses * (np.sum(moments.U**2, axis=-1) - np.sum(np.asarray(U_t) ** 2))
    return float(np.sum(nu_t * moments.n * (kinetic + 1.5 * cfg.k * moments.T)))


def f_of_x(x: float, moments: MomentSet, nu_t, U_t, cfg: PhysicalConfig) -> float:
    """Reactive temperature as a (linear) function of the candidate density ``x``."""
    nu_t = np.asarray(nu_t, dtype=float)
    numerator = _thermal_sum(moments, nu_t, U_t, cfg) + cfg.delta_e * nu_t[0] * (x - moments.n[0])
    value = numerator / (1.5 * cfg.k * float(np.sum(nu_t * moments.n)))
    if not value > 0:
        raise ValueError(f"F({x}) = {value} is not positive; candidate outside the constraint interval")
    return value


@dataclass(frozen=True)
class LogFunctional:
    """Monotone log-form objective with independent argument slots.

    With ``x = y = n``, ``mu = eta = nu~``, ``alpha = T`` and
    ``beta = |U_i - U~|`` it is the fast-model objective ``L``.
    """

    mu1: float
    mu2x2: float
    eta1y1: float
    eta3y3: float
    eta4y4: float
    log_prefactor: float  # log(mu3 mu4 / eta2)
    base: float  # sum_i mu_i x_i [m_i beta_i^2 / 2 + 3 k alpha_i / 2]
    weighted: float  # sum_i eta_i y_i
    delta_e: float

    @classmethod
    def from_slots(cls, x, y, mu, eta, alpha, beta, cfg: PhysicalConfig) -> "LogFunctional":
        x, y, mu, eta, alpha, beta = (np.broadcast_to(np.asarray(a, dtype=float), (4,)) for a in
                                      (x, y, mu, eta, alpha, beta))
        base = float(np.sum(mu * x * (0.5 * cfg.masses * beta**2 + 1.5 * cfg.k * alpha)))
        return cls(
            mu1=float(mu[0]),
            mu2x2=float(mu[1] * x[1]),
            eta1y1=float(eta[0] * y[0]),
            eta3y3=float(eta[2] * y[2]),
            eta4y4=float(eta[3] * y[3]),
            log_prefactor=math.log(mu[2] * mu[3] / eta[1]),
            base=base,
            weighted=float(np.sum(eta * y)),
            delta_e=cfg.delta_e,
        )

    @classmethod
    def for_state(cls, moments: MomentSet, nu_t, U_t, cfg: PhysicalConfig) -> "LogFunctional":
        nu_t = np.asarray(nu_t, dtype=float)
        n = moments.n
        return cls(
            mu1=float(nu_t[0]),
            mu2x2=float(nu_t[1] * n[1]),
            eta1y1=float(nu_t[0] * n[0]),
            eta3y3=float(nu_t[2] * n[2]),
            eta4y4=float(nu_t[3] * n[3]),
            log_prefactor=math.log(nu_t[2] * nu_t[3] / nu_t[1]),
            base=_thermal_sum(moments, nu_t, U_t, cfg),
            weighted=float(np.sum(nu_t * n)),
            delta_e=cfg.delta_e,
        )

    def bracket(self) -> tuple[float, float]:
        """Open interval on which every logarithm and the temperature are defined."""
        lo = max(0.0, (self.eta1y1 - self.mu2x2) / self.mu1,
                 (self.eta1y1 - self.base / self.delta_e) / self.mu1)
        hi = min(self.eta3y3 + self.eta1y1, self.eta4y4 + self.eta1y1) / self.mu1
        return lo, hi

    def _parts(self, z: float):
        shift = self.mu1 * z - self.eta1y1
        return (z, self.mu2x2 + shift, self.eta3y3 - shift, self.eta4y4 - shift,
                self.base + self.delta_e * shift)

    def __call__(self, z: float) -> float:
        z0, p2, p3, p4, denom = self._parts(z)
        if min(z0, p2, p3, p4, denom) <= 0:
            raise ValueError(f"z = {z} lies outside the constraint interval")
        return (self.log_prefactor + math.log(z0) + math.log(p2) - math.log(p3) - math.log(p4)
                - 1.5 * self.delta_e * self.weighted / denom)

    def derivative(self, z: float) -> float:
        z0, p2, p3, p4, denom = self._parts(z)
        return (1.0 / z0 + self.mu1 / p2 + self.mu1 / p3 + self.mu1 / p4
                + 1.5 * self.delta_e**2 * self.mu1 * self.weighted / denom**2)


def equilibrium_target(cfg: PhysicalConfig) -> float:
    return 1.5 * math.log(cfg.mu12 / cfg.mu34)


@dataclass(frozen=True)
class RootResult:
    root: float
    residual: float
    iterations: int
    bracket: tuple[float, float]


def solve_monotone(fn: LogFunctional, target: float, tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER, monotone_samples: int = 0,
                   accept_resolution: bool = False) -> RootResult:
    """Root of ``fn(z) = target`` on ``fn.bracket()``: bisection with Newton polishing.

    With ``accept_resolution`` a root bracketed between adjacent floats is
    returned even when the residual is above ``tol`` (very steep objectives).
    """
    lo, hi = fn.bracket()
    if not lo < hi:
        raise RootSolveError(f"empty constraint interval ({lo}, {hi})")
    margin = BRACKET_MARGIN * (hi - lo)
    a, b = lo + margin, hi - margin

    def g(z):
        return fn(z) - target

    ga, gb = g(a), g(b)
    if not (ga < 0 < gb):
        raise RootSolveError(f"bracket endpoints do not straddle the root: g({a})={ga}, g({b})={gb}")
    if monotone_samples:
        zs = np.linspace(a, b, monotone_samples + 2)
        gs = np.array([g(z) for z in zs])
        if np.any(np.diff(gs) <= 0):
            raise RootSolveError("log objective is not increasing on the constraint interval")

    z = 0.5 * (a + b)
    step_old = b - a
    for it in range(1, max_iter + 1):
        gz = g(z)
        if abs(gz) <= tol:
            return RootResult(z, abs(gz), it, (lo, hi))
        if gz < 0:
            a = z
        else:
            b = z
        newton = z - gz / fn.derivative(z)
        if a < newton < b and abs(newton - z) < 0.5 * step_old:
            step_old = abs(newton - z)
            z_next = newton
        else:
            step_old = b - a
            z_next = 0.5 * (a + b)
        if z_next == z or b - a <= 4.0 * np.finfo(float).eps * abs(z):
            # no representable progress left
            best = min((a, b, z), key=lambda t: abs(g(t)))
            res = abs(g(best))
            if res <= tol or accept_resolution:
                return RootResult(best, res, it, (lo, hi))
            raise RootSolveError(f"root residual {res:.3e} above tolerance {tol:.1e} at machine resolution")
        z = z_next
    raise RootSolveError(f"root residual {abs(g(z)):.3e} not below {tol:.1e} within {max_iter} iterations")


def constraint_bracket(moments: MomentSet, nu_t, U_t, cfg: PhysicalConfig) -> tuple[float, float]:
    """Open interval of admissible ``n~_1`` (positive densities and temperature)."""
    lo, hi = LogFunctional.from_slots(
        moments.n, moments.n, nu_t, nu_t, moments.T,
        np.linalg.norm(moments.U - np.asarray(U_t), axis=-1), cfg,
    ).bracket()
    if not lo < hi:
        raise RootSolveError(f"empty constraint interval ({lo}, {hi})")
    return lo, hi


def log_objective(z: float, moments: MomentSet, nu_t, U_t, cfg: PhysicalConfig) -> float:
    return LogFunctional.for_state(moments, nu_t, U_t, cfg)(z)


def solve_n1(moments: MomentSet, nu_t, U_t, cfg: PhysicalConfig, tol: float = DEFAULT_TOL,
             max_iter: int = DEFAULT_MAX_ITER, monotone_samples: int = 4) -> RootResult:
    """Reactive density of species 1 at a single spatial node."""
    fn = LogFunctional.for_state(moments, nu_t, U_t, cfg)
    return solve_monotone(fn, equilibrium_target(cfg), tol, max_iter, monotone_samples)


@dataclass(frozen=True)
class FastEquilibrium:
    nu: np.ndarray
    n: np.ndarray
    U: np.ndarray
    T: np.ndarray
    root_iterations: np.ndarray
    root_residual: np.ndarray
    bracket: np.ndarray
    moments: MomentSet


def fast_parameters(moments: MomentSet, nu_t, n1: float, cfg: PhysicalConfig, U_t=None):
    """``(n~, U~, T~)`` at one node given the root ``n~_1``."""
    nu_t = np.asarray(nu_t, dtype=float)
    if U_t is None:
        U_t = reactive_velocity(moments, nu_t, cfg)
    shift = nu_t[0] * (n1 - moments.n[0])
    n = moments.n + LAMBDA * shift / nu_t
    n[0] = n1
    T = f_of_x(n1, moments, nu_t, U_t, cfg)
    if np.any(~(n > 0)):
        i = int(np.argmin(n))
        raise RootSolveError(f"reactive density of species {i + 1} is {n[i]}; root outside the constraint interval")
    return n, np.asarray(U_t, dtype=float), T


def fast_equilibrium(moments: MomentSet, cfg: PhysicalConfig, tol: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER) -> FastEquilibrium:
    """Fast-model equilibrium at every spatial node of ``moments``."""
    nu = fast_frequencies(moments, cfg)
    U_t = reactive_velocity(moments, nu, cfg)
    lead = moments.n.shape[:-1]
    n = np.empty(lead + (4,))
    T = np.empty(lead)
    iters = np.empty(lead, dtype=int)
    resid = np.empty(lead)
    brackets = np.empty(lead + (2,))
    for idx in np.ndindex(*lead):
        local = moments.at(idx)
        try:
            res = solve_n1(local, nu[idx], U_t[idx], cfg, tol, max_iter)
        except RootSolveError as exc:
            raise RootSolveError(f"node {idx if len(idx) != 1 else idx[0]}: {exc}") from exc
        n[idx], _, T[idx] = fast_parameters(local, nu[idx], res.root, cfg, U_t[idx])
        iters[idx], resid[idx], brackets[idx] = res.iterations, res.residual, res.bracket
    return FastEquilibrium(nu, n, U_t, T, iters, resid, brackets, moments)
