"""File emitters: legacy-VTK fields, CSV tables, statistics containers.

Fields go out as VTK legacy ASCII ``RECTILINEAR_GRID`` datasets with one
``POINT_DATA`` scalar array per field; vertex order (axis 0 fastest)
matches the internal flat numbering, so arrays are written as-is.  2D
grids are emitted with a single z coordinate of 0.  CSV files carry full
precision (17 significant digits).

Statistics live in a self-describing ``.npz`` container with keys
``snapshot_steps``, ``times``, ``mean``, ``variance``,
``exceedance_thresholds``, ``exceedance`` (thresholds x snapshots x
DoFs), ``n_effective``, plus the grid descriptor ``grid_lo``,
``grid_hi``, ``grid_n``.
"""

from __future__ import annotations

import os

import numpy as np

from .ensemble import StatisticsFields
from .grid import StructuredGrid

__all__ = ["write_vtk", "write_csv", "fmt", "save_statistics", "load_statistics",
           "grid_descriptor", "threshold_key"]


def fmt(value) -> str:
    """Full-precision decimal rendering used in every CSV cell."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float) or isinstance(value, np.floating):
        return f"{float(value):.17g}"
    return str(value)


def write_vtk(path, grid: StructuredGrid, point_data: dict, title: str = "saltflow") -> str:
    """Write per-vertex scalar fields to a legacy-ASCII rectilinear VTK file."""
    axes = list(grid.axes)
    dims = list(grid.n)
    while len(axes) < 3:
        axes.append(np.array([0.0]))
        dims.append(1)
    n_pts = grid.n_vertices
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET RECTILINEAR_GRID",
             f"DIMENSIONS {dims[0]} {dims[1]} {dims[2]}"]
    for label, ax in zip(("X", "Y", "Z"), axes):
        lines.append(f"{label}_COORDINATES {len(ax)} double")
        lines.append(" ".join(fmt(v) for v in ax))
    lines.append(f"POINT_DATA {n_pts}")
    for name, values in point_data.items():
        values = np.asarray(values, dtype=float).ravel()
        if values.shape != (n_pts,):
            raise ValueError(f"field {name!r} has {values.size} values for {n_pts} vertices")
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(fmt(v) for v in values)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def write_csv(path, header, rows) -> str:
    """Write rows of numbers/strings with full-precision formatting."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def grid_descriptor(grid: StructuredGrid) -> dict:
    return {"lo": list(grid.domain.lo), "hi": list(grid.domain.hi), "n": list(grid.n)}


def threshold_key(threshold: float) -> str:
    """Field-name suffix for an exceedance threshold (e.g. 0.5 -> '0.5')."""
    return f"{threshold:g}"


def save_statistics(path, stats: StatisticsFields, grid: StructuredGrid) -> str:
    thresholds = np.array(sorted(stats.exceedance), dtype=float)
    exceed = (np.stack([stats.exceedance[t] for t in thresholds])
              if thresholds.size else np.empty((0,) + stats.mean.shape))
    np.savez_compressed(
        path,
        snapshot_steps=stats.snapshot_steps,
        times=stats.times,
        mean=stats.mean,
        variance=stats.variance,
        exceedance_thresholds=thresholds,
        exceedance=exceed,
        n_effective=np.int64(stats.n_effective),
        grid_lo=np.asarray(grid.domain.lo),
        grid_hi=np.asarray(grid.domain.hi),
        grid_n=np.asarray(grid.n, dtype=np.int64),
    )
    return path


def load_statistics(path) -> StatisticsFields:
    with np.load(path, allow_pickle=False) as data:
        thresholds = data["exceedance_thresholds"]
        exceed = {float(t): data["exceedance"][k] for k, t in enumerate(thresholds)}
        return StatisticsFields(
            snapshot_steps=data["snapshot_steps"],
            times=data["times"],
            mean=data["mean"],
            variance=data["variance"],
            exceedance=exceed,
            n_effective=int(data["n_effective"]),
        )
