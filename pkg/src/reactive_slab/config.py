"""Physical configuration, boundary inflow data and the boundary budget.

Config files are INI-style text with the sections ``[species]``,
``[interaction]``, ``[boundary]``, ``[grid]`` and ``[solver]``; the keys are
documented in the README.  Everything is assumed to be nondimensionalised.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .grid import PhaseGrid, integrate

SPECIES = 4
LAMBDA = np.array([1.0, 1.0, -1.0, -1.0])
MASS_TOL = 1e-12
# relative tolerance for quadrature-level checks on inflow data
QUADRATURE_TOL = 1e-10


class ConfigError(ValueError):
    """Invalid configuration or inflow data."""


@dataclass(frozen=True)
class PhysicalConfig:
    masses: np.ndarray
    bond_energies: np.ndarray
    chi: np.ndarray
    nu: np.ndarray
    nu_forward: float  # nu_12^34, slow model
    nu_backward: float  # nu_34^12, fast model
    tau: float
    k: float = 1.0

    def __post_init__(self):
        for name in ("masses", "bond_energies", "chi", "nu"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "nu_forward", float(self.nu_forward))
        object.__setattr__(self, "nu_backward", float(self.nu_backward))
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "k", float(self.k))

    @property
    def lam(self) -> np.ndarray:
        return LAMBDA

    @property
    def total_mass(self) -> float:
        return float(self.masses[0] + self.masses[1])

    @property
    def reduced_masses(self) -> np.ndarray:
        m = self.masses
        return np.outer(m, m) / (m[:, None] + m[None, :])

    @property
    def mu12(self) -> float:
        return float(self.reduced_masses[0, 1])

    @property
    def mu34(self) -> float:
        return float(self.reduced_masses[2, 3])

    @property
    def delta_e(self) -> float:
        return float(-np.sum(LAMBDA * self.bond_energies))

    def with_tau(self, tau: float) -> "PhysicalConfig":
        return PhysicalConfig(self.masses, self.bond_energies, self.chi, self.nu,
                              self.nu_forward, self.nu_backward, tau, self.k)

    def with_rates(self, nu_forward: float | None = None, nu_backward: float | None = None) -> "PhysicalConfig":
        return PhysicalConfig(
            self.masses, self.bond_energies, self.chi, self.nu,
            self.nu_forward if nu_forward is None else nu_forward,
            self.nu_backward if nu_backward is None else nu_backward,
            self.tau, self.k,
        )


def validate_physical(cfg: PhysicalConfig) -> PhysicalConfig:
    """Check every invariant of :class:`PhysicalConfig`; raise :class:`ConfigError`."""
    m = cfg.masses
    if m.shape != (SPECIES,):
        raise ConfigError(f"masses: expected 4 values, got shape {m.shape}")
    if cfg.bond_energies.shape != (SPECIES,):
        raise ConfigError(f"bond_energies: expected 4 values, got shape {cfg.bond_energies.shape}")
    for name in ("chi", "nu"):
        if getattr(cfg, name).shape != (SPECIES, SPECIES):
            raise ConfigError(f"{name}: expected a 4x4 matrix, got shape {getattr(cfg, name).shape}")
    arrays = (m, cfg.bond_energies, cfg.chi, cfg.nu)
    scalars = (cfg.nu_forward, cfg.nu_backward, cfg.tau, cfg.k)
    if not all(np.all(np.isfinite(a)) for a in arrays) or not all(map(math.isfinite, scalars)):
        raise ConfigError("configuration contains non-finite values")
    if np.any(m <= 0):
        raise ConfigError(f"masses: require m_i > 0, got {m.tolist()}")
    if abs((m[0] + m[1]) - (m[2] + m[3])) > MASS_TOL * (m[0] + m[1]):
        raise ConfigError(f"masses: require m1 + m2 = m3 + m4, got {m[0] + m[1]} != {m[2] + m[3]}")
    if cfg.k <= 0:
        raise ConfigError(f"boltzmann: require k > 0, got {cfg.k}")
    if cfg.tau <= 0:
        raise ConfigError(f"tau: require tau > 0, got {cfg.tau}")
    if np.any(cfg.nu <= 0):
        i, j = np.argwhere(cfg.nu <= 0)[0]
        raise ConfigError(f"nu: require nu_{i + 1}{j + 1} > 0, got {cfg.nu[i, j]}")
    if np.any(cfg.chi < 0):
        i, j = np.argwhere(cfg.chi < 0)[0]
        raise ConfigError(f"chi: require chi_{i + 1}{j + 1} >= 0, got {cfg.chi[i, j]}")
    bad = np.argwhere(cfg.chi > cfg.nu)
    if bad.size:
        i, j = bad[0]
        raise ConfigError(
            f"chi exceeds nu for pair ({i + 1},{j + 1}): chi_{i + 1}{j + 1} = {cfg.chi[i, j]} "
            f"> nu_{i + 1}{j + 1} = {cfg.nu[i, j]} (require chi_ij <= nu_ij)"
        )
    if cfg.nu_forward < 0:
        raise ConfigError(f"nu_forward: require nu_12^34 >= 0, got {cfg.nu_forward}")
    if cfg.nu_backward < 0:
        raise ConfigError(f"nu_backward: require nu_34^12 >= 0, got {cfg.nu_backward}")
    if not cfg.delta_e > 0:
        raise ConfigError(
            f"bond_energies: require energy threshold Delta E = -sum(lambda_i E_i) > 0, got {cfg.delta_e}"
        )
    return cfg


# --------------------------------------------------------------------------
# inflow data


@dataclass(frozen=True)
class HalfMaxwellian:
    """Maxwellian inflow ``n (m/2 pi k T)^{3/2} exp(-m|v - (u,0,0)|^2 / 2kT)``.

    Only the drift along the slab normal is representable, so the inflow
    never carries transverse flow.
    """

    density: float = 1.0
    drift: float = 0.0
    temperature: float = 1.0

    def evaluate(self, grid: PhaseGrid, mass: float, k: float) -> np.ndarray:
        if not (self.density > 0 and self.temperature > 0):
            raise ConfigError(f"half-Maxwellian inflow needs positive density and temperature, got {self}")
        from .slow import maxwellian

        return maxwellian(self.density, (self.drift, 0.0, 0.0), self.temperature, mass,
                          grid.v1, grid.v2, grid.v3, k)


@dataclass(frozen=True)
class TabulatedInflow:
    """Inflow given as values on the velocity nodes or a callable ``g(v1, v2, v3)``."""

    values: Union[np.ndarray, Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]]
    source: str = "<array>"

    def evaluate(self, grid: PhaseGrid, mass: float, k: float) -> np.ndarray:
        if callable(self.values):
            out = np.asarray(self.values(grid.v1, grid.v2, grid.v3), dtype=float)
        else:
            out = np.asarray(self.values, dtype=float).reshape(-1)
        if out.shape != (grid.nv,):
            raise ConfigError(f"tabulated inflow {self.source}: expected {grid.nv} values, got shape {out.shape}")
        return out


InflowSpec = Union[HalfMaxwellian, TabulatedInflow]


@dataclass(frozen=True)
class BoundaryData:
    left: tuple
    right: tuple

    def __post_init__(self):
        object.__setattr__(self, "left", tuple(self.left))
        object.__setattr__(self, "right", tuple(self.right))
        if len(self.left) != SPECIES or len(self.right) != SPECIES:
            raise ConfigError("boundary data needs one inflow spec per species at each wall")

    @classmethod
    def uniform(cls, left: InflowSpec, right: InflowSpec | None = None) -> "BoundaryData":
        right = left if right is None else right
        return cls((left,) * SPECIES, (right,) * SPECIES)

    def tabulate(self, grid: PhaseGrid, cfg: PhysicalConfig) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(f_L, f_R)`` of shape ``(4, nv)``, each zeroed on its outgoing half."""
        pos = grid.positive
        f_left = np.zeros((SPECIES, grid.nv))
        f_right = np.zeros((SPECIES, grid.nv))
        for i in range(SPECIES):
            fl = self.left[i].evaluate(grid, cfg.masses[i], cfg.k)
            fr = self.right[i].evaluate(grid, cfg.masses[i], cfg.k)
            f_left[i] = np.where(pos, fl, 0.0)
            f_right[i] = np.where(pos, 0.0, fr)
        return f_left, f_right


def validate_boundary(bd: BoundaryData, grid: PhaseGrid, cfg: PhysicalConfig) -> tuple[np.ndarray, np.ndarray]:
    """Check inflow invariants on ``grid`` and return the tabulated inflow."""
    f_left, f_right = bd.tabulate(grid, cfg)
    shape = (SPECIES, *grid.shape)
    w23 = np.outer(grid.w2_axis, grid.w3_axis)
    speed = np.sqrt(grid.speed_squared)
    for wall, values in (("left", f_left), ("right", f_right)):
        if not np.all(np.isfinite(values)):
            raise ConfigError(f"{wall} inflow contains non-finite values")
        if np.any(values < 0):
            i = int(np.argwhere(values < 0)[0, 0])
            raise ConfigError(f"{wall} inflow of species {i + 1} is negative somewhere")
        # zero transverse flow, checked on every v1 slice
        cube = values.reshape(shape)
        scale = np.einsum("svab,ab->sv", (values * speed).reshape(shape), w23)
        for j, axis in ((2, grid.v2_axis[:, None]), (3, grid.v3_axis[None, :])):
            flux = np.einsum("svab,ab->sv", cube * axis, w23)
            bad = np.abs(flux) > QUADRATURE_TOL * np.maximum(scale, np.finfo(float).tiny)
            if np.any(bad):
                i = int(np.argwhere(bad)[0, 0])
                raise ConfigError(f"{wall} inflow of species {i + 1} carries transverse flow along v{j}")
    f_lr = f_left + f_right
    speed2 = grid.speed_squared
    for label, values in (
        ("int f dv", integrate(f_lr, grid)),
        ("int f |v|^2 dv", integrate(f_lr * speed2, grid)),
        ("int f / |v1| dv", integrate(f_lr, grid, "inverse_v1")),
        ("int f |v|^2 / |v1| dv", integrate(f_lr * speed2, grid, "inverse_v1")),
    ):
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            i = int(np.argwhere(~(np.isfinite(values) & (values > 0)))[0, 0])
            raise ConfigError(f"inflow moment {label} of species {i + 1} is not finite and positive on this grid")
    return f_left, f_right


# --------------------------------------------------------------------------
# boundary budget


@dataclass(frozen=True)
class BoundaryBudget:
    a_u: np.ndarray  # per species a_{i,u}
    a_s: np.ndarray
    a_l: np.ndarray
    c_u: np.ndarray
    c_s: np.ndarray
    c_l: np.ndarray
    gamma: np.ndarray  # per species gamma_{i,l}
    a_max: float
    a_min: float
    c_max: float
    c_min: float
    gamma_min: float
    temperature_lower: float
    temperature_upper: float

    @property
    def velocity_radius(self) -> float:
        """``R = max_i (a_{i,u} + c_{i,u}) / (2 a_{i,l})``."""
        return float(np.max((self.a_u + self.c_u) / (2.0 * self.a_l)))

    def as_dict(self) -> dict:
        out = {}
        for name in ("a_u", "a_s", "a_l", "c_u", "c_s", "c_l", "gamma"):
            out[name] = getattr(self, name).tolist()
        for name in ("a_max", "a_min", "c_max", "c_min", "gamma_min",
                     "temperature_lower", "temperature_upper"):
            out[name] = getattr(self, name)
        out["velocity_radius"] = self.velocity_radius
        return out


def budget_from_moments(a_u, a_s, c_u, c_s, gamma, cfg: PhysicalConfig) -> BoundaryBudget:
    a_u, a_s, c_u, c_s, gamma = (np.asarray(v, dtype=float) for v in (a_u, a_s, c_u, c_s, gamma))
    a_l = a_u / 8.0
    c_l = c_u / 8.0
    a_max, a_min = float(a_u.max()), float(a_l.min())
    c_max, c_min = float(c_u.max()), float(c_l.min())
    gamma_min = float(gamma.min())
    t_lower = float(np.min(cfg.masses * gamma_min / (3.0 * cfg.k * a_u**2)))
    t_upper = float(c_max / (12.0 * cfg.k * a_min) * np.sum(cfg.masses))
    return BoundaryBudget(a_u, a_s, a_l, c_u, c_s, c_l, gamma, a_max, a_min, c_max, c_min,
                          gamma_min, t_lower, t_upper)


def compute_boundary_budget(bd: BoundaryData, cfg: PhysicalConfig, grid: PhaseGrid) -> BoundaryBudget:
    """Budget constants that bound the solution space, from the inflow data."""
    f_left, f_right = validate_boundary(bd, grid, cfg)
    f_lr = f_left + f_right
    speed2 = grid.speed_squared
    abs_v1 = np.abs(grid.v1)
    a_u = 2.0 * integrate(f_lr, grid)
    c_u = 2.0 * integrate(f_lr * speed2, grid)
    a_s = integrate(f_lr, grid, "inverse_v1")
    c_s = integrate(f_lr * speed2, grid, "inverse_v1")
    gamma = integrate(f_left * abs_v1, grid) * integrate(f_right * abs_v1, grid) / 16.0
    for name, vals in (("a_u", a_u), ("c_u", c_u), ("a_s", a_s), ("c_s", c_s), ("gamma", gamma)):
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            i = int(np.argwhere(~(np.isfinite(vals) & (vals > 0)))[0, 0])
            raise ConfigError(f"budget {name} of species {i + 1} is {vals[i]}; inflow data too degenerate for this grid")
    return budget_from_moments(a_u, a_s, c_u, c_s, gamma, cfg)


# --------------------------------------------------------------------------
# config files


@dataclass
class GridParams:
    nx: int = 64
    nv1: int = 48
    nv23: int = 24
    vmax: float | None = None


@dataclass
class SolverParams:
    model: str = "slow"
    tol: float = 1e-10
    max_iter: int = 500
    relaxation: float = 1.0
    seed: int = 0
    threads: int = 0
    probes: int = 8


@dataclass
class RunConfig:
    physical: PhysicalConfig
    boundary: BoundaryData
    grid: GridParams = field(default_factory=GridParams)
    solver: SolverParams = field(default_factory=SolverParams)
    path: Path | None = None


def _floats(text: str, key: str) -> list[float]:
    parts = [p for p in re.split(r"[\s,;]+", text.strip()) if p]
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {text!r} as numbers") from exc


def _matrix(text: str, key: str) -> np.ndarray:
    vals = _floats(text, key)
    if len(vals) == 1:
        return np.full((SPECIES, SPECIES), vals[0])
    if len(vals) != SPECIES * SPECIES:
        raise ConfigError(f"{key}: expected 1 or 16 values, got {len(vals)}")
    return np.array(vals).reshape(SPECIES, SPECIES)


def _vector(text: str, key: str) -> np.ndarray:
    vals = _floats(text, key)
    if len(vals) == 1:
        return np.full(SPECIES, vals[0])
    if len(vals) != SPECIES:
        raise ConfigError(f"{key}: expected 1 or 4 values, got {len(vals)}")
    return np.array(vals)


def _scalar(section, key: str, default=None, kind=float):
    if key not in section:
        if default is None:
            raise ConfigError(f"[{section.name}] missing required key {key!r}")
        return default
    try:
        return kind(section[key])
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {key}: cannot parse {section[key]!r}") from exc


def parse_inflow(text: str, base: Path | None, key: str) -> InflowSpec:
    """Parse ``maxwellian n=.. u=.. T=..`` or ``table <file.npy>``."""
    words = text.split()
    if not words:
        raise ConfigError(f"{key}: empty inflow spec")
    kind = words[0].lower()
    if kind == "maxwellian":
        params = {"n": 1.0, "u": 0.0, "t": 1.0}
        for word in words[1:]:
            name, _, value = word.partition("=")
            name = name.lower()
            if name in ("v", "w") or name not in params:
                raise ConfigError(f"{key}: unknown or transverse Maxwellian parameter {word!r}")
            try:
                params[name] = float(value)
            except ValueError as exc:
                raise ConfigError(f"{key}: bad value in {word!r}") from exc
        if params["n"] <= 0 or params["t"] <= 0:
            raise ConfigError(f"{key}: Maxwellian inflow needs n > 0 and T > 0")
        return HalfMaxwellian(params["n"], params["u"], params["t"])
    if kind == "table":
        if len(words) != 2:
            raise ConfigError(f"{key}: expected 'table <file.npy>'")
        path = Path(words[1])
        if base is not None and not path.is_absolute():
            path = base / path
        try:
            data = np.load(path)
        except OSError as exc:
            raise ConfigError(f"{key}: cannot read {path}: {exc}") from exc
        return TabulatedInflow(np.asarray(data, dtype=float), source=str(path))
    raise ConfigError(f"{key}: unknown inflow kind {words[0]!r} (use 'maxwellian' or 'table')")


def _read(path) -> configparser.ConfigParser:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return parser


def physical_from_parser(parser: configparser.ConfigParser) -> PhysicalConfig:
    for name in ("species", "interaction"):
        if not parser.has_section(name):
            raise ConfigError(f"missing section [{name}]")
    sp, it = parser["species"], parser["interaction"]
    if "masses" not in sp:
        raise ConfigError("[species] missing required key 'masses'")
    cfg = PhysicalConfig(
        masses=_vector(sp["masses"], "masses"),
        bond_energies=_vector(sp.get("bond_energies", "0"), "bond_energies"),
        chi=_matrix(it.get("chi", "0"), "chi"),
        nu=_matrix(it.get("nu", "1"), "nu"),
        nu_forward=_scalar(it, "nu_forward", 0.0),
        nu_backward=_scalar(it, "nu_backward", 0.0),
        tau=_scalar(it, "tau"),
        k=_scalar(sp, "boltzmann", 1.0),
    )
    return validate_physical(cfg)


def load_config(path) -> PhysicalConfig:
    """Read and validate the physical part of a config file."""
    return physical_from_parser(_read(path))


def load_run_config(path) -> RunConfig:
    """Read every section of a config file."""
    path = Path(path)
    parser = _read(path)
    physical = physical_from_parser(parser)
    if not parser.has_section("boundary"):
        raise ConfigError("missing section [boundary]")
    b = parser["boundary"]
    left, right = [], []
    for wall, out in (("left", left), ("right", right)):
        for i in range(1, SPECIES + 1):
            key = f"{wall}.{i}"
            text = b.get(key, b.get(wall))
            if text is None:
                raise ConfigError(f"[boundary] no inflow for species {i} at the {wall} wall (keys {key!r} or {wall!r})")
            out.append(parse_inflow(text, path.parent, f"[boundary] {key}"))
    grid = GridParams()
    if parser.has_section("grid"):
        g = parser["grid"]
        grid = GridParams(
            nx=_scalar(g, "nx", grid.nx, int),
            nv1=_scalar(g, "nv1", grid.nv1, int),
            nv23=_scalar(g, "nv23", grid.nv23, int),
            vmax=_scalar(g, "vmax", 0.0) or None,
        )
    solver = SolverParams()
    if parser.has_section("solver"):
        s = parser["solver"]
        solver = SolverParams(
            model=s.get("model", solver.model).strip().lower(),
            tol=_scalar(s, "tol", solver.tol),
            max_iter=_scalar(s, "max_iter", solver.max_iter, int),
            relaxation=_scalar(s, "relaxation", solver.relaxation),
            seed=_scalar(s, "seed", solver.seed, int),
            threads=_scalar(s, "threads", solver.threads, int),
            probes=_scalar(s, "probes", solver.probes, int),
        )
        if solver.model not in ("slow", "fast"):
            raise ConfigError(f"[solver] model must be 'slow' or 'fast', got {solver.model!r}")
        if not 0 < solver.relaxation <= 1:
            raise ConfigError(f"[solver] relaxation must lie in (0, 1], got {solver.relaxation}")
    return RunConfig(physical, BoundaryData(left, right), grid, solver, path)
