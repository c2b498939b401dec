"""Shared test helpers: scalar diffusion operators on grid hierarchies."""

import numpy as np
import scipy.sparse as sp

from saltflow.grid import BoxDomain, GridTransfer, build_grid
from saltflow.solvers import LinearSolverConfig, MgHierarchy


def poisson_matrix(grid) -> sp.csr_matrix:
    """FV 5/7-point Laplacian with identity rows on the boundary."""
    n = grid.n_vertices
    rows, cols, vals = [], [], []
    for idx_a, idx_b, area, h in grid.faces():
        coef = area / h
        rows.extend([idx_a, idx_a, idx_b, idx_b])
        cols.extend([idx_a, idx_b, idx_b, idx_a])
        vals.extend([coef, -coef, coef, -coef])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    boundary = grid.tags != 0
    keep = ~boundary[rows]
    rows, cols, vals = rows[keep], cols[keep], vals[keep]
    bidx = np.flatnonzero(boundary)
    rows = np.concatenate([rows, bidx])
    cols = np.concatenate([cols, bidx])
    vals = np.concatenate([vals, np.ones(bidx.size)])
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    A.sort_indices()
    return A


def poisson_hierarchy(n_coarse: int, levels: int, cfg: LinearSolverConfig):
    """Unit-square Laplacian plus an MG hierarchy over nested grids."""
    domain = BoxDomain((0.0, 0.0), (1.0, 1.0))
    grids = build_grid(domain, (n_coarse, n_coarse), levels, None)
    matrices = [poisson_matrix(g) for g in grids]
    prolongs = [GridTransfer(grids[l], grids[l + 1]).P for l in range(levels - 1)]
    mg = MgHierarchy(matrices, prolongs, cfg)
    return grids, matrices, mg
