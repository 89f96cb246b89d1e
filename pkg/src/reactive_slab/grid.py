"""Phase-space grid for the slab problem.

The slab ``[0, 1]`` is sampled at ``nx + 1`` uniform nodes.  Velocity space is
a tensor product of cell-centred uniform 1-D grids on ``[-vmax, vmax]``; the
``v1`` axis always has an even node count so that no node sits on ``v1 = 0``
and ``1/|v1|`` stays finite.  Velocity arrays are stored flattened
(C order over ``(v1, v2, v3)``) so that a distribution on the grid is an array
whose last axis has length ``nv``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_NX = 64
DEFAULT_NV1 = 48
DEFAULT_NV23 = 24
DEFAULT_VMAX = 10.0


class GridError(ValueError):
    pass


def cell_centered_nodes(count: int, vmax: float) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint-rule nodes and weights on ``[-vmax, vmax]``."""
    h = 2.0 * vmax / count
    nodes = -vmax + h * (np.arange(count) + 0.5)
    return nodes, np.full(count, h)


@dataclass(frozen=True)
class PhaseGrid:
    x: np.ndarray
    v1_axis: np.ndarray
    v2_axis: np.ndarray
    v3_axis: np.ndarray
    w1_axis: np.ndarray
    w2_axis: np.ndarray
    w3_axis: np.ndarray
    vmax: float
    # flattened velocity nodes, filled in __post_init__
    v1: np.ndarray = field(init=False, repr=False)
    v2: np.ndarray = field(init=False, repr=False)
    v3: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g1, g2, g3 = np.meshgrid(self.v1_axis, self.v2_axis, self.v3_axis, indexing="ij")
        h1, h2, h3 = np.meshgrid(self.w1_axis, self.w2_axis, self.w3_axis, indexing="ij")
        for name, value in (
            ("v1", g1.ravel()),
            ("v2", g2.ravel()),
            ("v3", g3.ravel()),
            ("weights", (h1 * h2 * h3).ravel()),
        ):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        for arr in (self.x, self.v1_axis, self.v2_axis, self.v3_axis,
                    self.w1_axis, self.w2_axis, self.w3_axis):
            arr.setflags(write=False)

    @property
    def nx(self) -> int:
        """Number of spatial cells (nodes minus one)."""
        return self.x.size - 1

    @property
    def nv(self) -> int:
        return self.v1.size

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.v1_axis.size, self.v2_axis.size, self.v3_axis.size)

    @property
    def speed_squared(self) -> np.ndarray:
        return self.v1 * self.v1 + self.v2 * self.v2 + self.v3 * self.v3

    @property
    def positive(self) -> np.ndarray:
        """Mask of velocity nodes with ``v1 > 0``."""
        return self.v1 > 0

    def same_as(self, other: "PhaseGrid") -> bool:
        return (
            self.shape == other.shape
            and self.x.size == other.x.size
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.v1_axis, other.v1_axis)
            and np.array_equal(self.v2_axis, other.v2_axis)
            and np.array_equal(self.v3_axis, other.v3_axis)
        )


def build_grid(
    nx: int = DEFAULT_NX,
    nv1: int = DEFAULT_NV1,
    nv23: int = DEFAULT_NV23,
    vmax: float = DEFAULT_VMAX,
) -> PhaseGrid:
    """Build a :class:`PhaseGrid`.

    An odd ``nv1`` would put a node on ``v1 = 0``; it is bumped to the next
    even count so the cell-centred nodes straddle zero.
    """
    if int(nx) != nx or nx < 2:
        raise GridError(f"nx must be an integer >= 2, got {nx!r}")
    if int(nv1) != nv1 or nv1 < 4:
        raise GridError(f"nv1 must be an integer >= 4, got {nv1!r}")
    if int(nv23) != nv23 or nv23 < 4:
        raise GridError(f"nv23 must be an integer >= 4, got {nv23!r}")
    if not (math.isfinite(vmax) and vmax > 0):
        raise GridError(f"vmax must be positive and finite, got {vmax!r}")
    nx, nv1, nv23 = int(nx), int(nv1), int(nv23)
    if nv1 % 2:
        nv1 += 1
    v1, w1 = cell_centered_nodes(nv1, vmax)
    v23, w23 = cell_centered_nodes(nv23, vmax)
    x = np.arange(nx + 1) / nx
    return PhaseGrid(
        x=x,
        v1_axis=v1,
        v2_axis=v23.copy(),
        v3_axis=v23.copy(),
        w1_axis=w1,
        w2_axis=w23.copy(),
        w3_axis=w23.copy(),
        vmax=float(vmax),
    )


def auto_vmax(temperature_upper: float, masses, k: float = 1.0) -> float:
    """Truncation radius ``8 * sqrt(k T / min m)``."""
    return 8.0 * math.sqrt(k * temperature_upper / float(np.min(masses)))


def integrate(values: np.ndarray, grid: PhaseGrid, weight_mode: str = "plain") -> np.ndarray:
    """Quadrature over the velocity axis (the last axis of ``values``).

    ``weight_mode="inverse_v1"`` divides the integrand by ``|v1|``.
    Leading axes are preserved, so a field of shape ``(..., nv)`` gives an
    array of shape ``(...)``.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != grid.nv:
        raise GridError(f"last axis has length {values.shape[-1]}, grid has {grid.nv} velocity nodes")
    if not np.all(np.isfinite(values)):
        raise GridError("integrand contains non-finite values")
    if weight_mode == "plain":
        w = grid.weights
    elif weight_mode == "inverse_v1":
        w = grid.weights / np.abs(grid.v1)
    else:
        raise GridError(f"unknown weight_mode {weight_mode!r}")
    # np.sum uses pairwise summation in a fixed order, independent of BLAS threading
    return np.sum(values * w, axis=-1)
