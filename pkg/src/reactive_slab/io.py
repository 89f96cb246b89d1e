"""Atomic writers for profiles, logs, reports and field dumps."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .config import SPECIES, ConfigError
from .fields import DistributionField
from .grid import PhaseGrid

FLOAT_FMT = "%.17g"
SUBDIRS = ("profiles", "logs", "reports", "fields")

SPECIES_COLUMNS = ("x", "n", "U1", "U2", "U3", "T", "eq_n", "eq_U1", "eq_U2", "eq_U3", "eq_T", "nu")
GLOBAL_COLUMNS = ("x", "n", "rho", "U1", "U2", "U3", "T")


def atomic_write_text(path, text: str) -> Path:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_npz(path, **arrays) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        with open(tmp, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def table_text(columns, rows: np.ndarray, delimiter: str = ",") -> str:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    lines = [delimiter.join(columns)]
    lines.extend(delimiter.join(FLOAT_FMT % v for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def make_layout(out_dir) -> Path:
    out = Path(out_dir)
    for sub in SUBDIRS:
        (out / sub).mkdir(parents=True, exist_ok=True)
    return out


def species_profile_rows(x, moments, equilibrium, species: int) -> np.ndarray:
    """Columns of :data:`SPECIES_COLUMNS` for one species (0-based index)."""
    i = species
    eq_U = np.asarray(equilibrium.U)
    eq_T = np.asarray(equilibrium.T)
    eq_U = eq_U[:, i] if eq_U.ndim == 3 else eq_U
    eq_T = eq_T[:, i] if eq_T.ndim == 2 else eq_T
    return np.column_stack([
        x, moments.n[:, i], moments.U[:, i], moments.T[:, i],
        equilibrium.n[:, i], eq_U, eq_T, equilibrium.nu[:, i],
    ])


def write_profiles(out_dir, grid: PhaseGrid, moments, equilibrium) -> list[Path]:
    """One CSV per species plus ``global.csv``; every float is written with 17 digits."""
    out = Path(out_dir) / "profiles"
    paths = []
    for i in range(SPECIES):
        rows = species_profile_rows(grid.x, moments, equilibrium, i)
        paths.append(atomic_write_text(out / f"species_{i + 1}.csv", table_text(SPECIES_COLUMNS, rows)))
    rows = np.column_stack([grid.x, moments.n_total, moments.rho_total, moments.U_total, moments.T_total])
    paths.append(atomic_write_text(out / "global.csv", table_text(GLOBAL_COLUMNS, rows)))
    return paths


def write_json(path, payload: dict) -> Path:
    return atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dump_field(path, f: DistributionField, sweep: int, distances, model: str) -> Path:
    g = f.grid
    return atomic_write_npz(
        path, values=f.values, sweep=np.int64(sweep), distances=np.asarray(distances, dtype=float),
        model=np.array(model), x=g.x, v1_axis=g.v1_axis, v2_axis=g.v2_axis, v3_axis=g.v3_axis,
    )


def load_field(path, grid: PhaseGrid):
    """Read a dump written by :func:`dump_field`; returns ``(field, sweep, distances, model)``."""
    if not Path(path).is_file():
        raise ConfigError(f"field dump {path} not found")
    with np.load(path) as data:
        for name in ("x", "v1_axis", "v2_axis", "v3_axis"):
            if not np.array_equal(data[name], getattr(grid, name)):
                raise ConfigError(f"field dump {path} was written on a different grid ({name} differs)")
        return (DistributionField(data["values"], grid), int(data["sweep"]),
                tuple(float(d) for d in data["distances"]), str(data["model"]))
