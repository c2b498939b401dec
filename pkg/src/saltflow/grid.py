"""Structured rectilinear vertex-centered grids with a nested hierarchy.

Vertices carry the unknowns; each vertex owns a dual control volume (the
tensor product of half-cell intervals, clipped at the boundary), and the
dual volumes partition the box exactly.  Grids come in nested families
for geometric multigrid: level ``l`` has ``(coarse_n - 1) * 2**l + 1``
vertices per axis, so every coarse vertex coincides with a fine one.

Conventions
-----------
* The last coordinate axis is vertical; the "top" face is the high end
  of that axis.  Gravity (handled by the discretization) points down it.
* Vertices are numbered with axis 0 fastest (Fortran-order raveling),
  which matches the VTK point order directly.
* ``tags`` classifies every vertex for the salt boundary condition:
  interior, no-flux, Dirichlet fresh (c = 0) or Dirichlet brine (c = 1).
  Top-face vertices are all Dirichlet; everything else on the boundary
  is no-flux.  The pressure pin set (p = 0, removing the pressure null
  space) is a separate boolean mask over the top-face perimeter, since a
  pinned vertex still needs its salt classification.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from functools import reduce

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError

__all__ = [
    "Tag",
    "BoxDomain",
    "DirichletPatch",
    "StructuredGrid",
    "build_grid",
    "dual_volume",
    "GridTransfer",
    "prolong",
    "restrict",
]


class Tag(IntEnum):
    """Per-vertex classification for the salt boundary condition."""

    INTERIOR = 0
    NOFLUX = 1
    DIRICHLET_FRESH = 2
    DIRICHLET_BRINE = 3
    PRESSURE_PIN = 4  # used in serialized tag listings only; see StructuredGrid


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box [lo_0, hi_0] x ... x [lo_{d-1}, hi_{d-1}] in meters."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or len(lo) not in (2, 3):
            raise ConfigError(f"domain must be 2D or 3D, got lo={lo}, hi={hi}")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ConfigError(f"domain corners must satisfy hi > lo per axis, got lo={lo}, hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def extent(self) -> tuple:
        return tuple(h - l for l, h in zip(self.lo, self.hi))


@dataclass(frozen=True)
class DirichletPatch:
    """Brine source region on the top face.

    ``shape`` is ``"rectangle"`` (in-plane bounds ``lo``/``hi``) or
    ``"disk"`` (``center``/``radius``).  In-plane coordinates are the
    first ``dim - 1`` axes of the domain.
    """

    shape: str
    lo: tuple | None = None
    hi: tuple | None = None
    center: tuple | None = None
    radius: float | None = None

    def __post_init__(self):
        if self.shape == "rectangle":
            if self.lo is None or self.hi is None:
                raise ConfigError("rectangle patch needs 'lo' and 'hi' bounds")
            object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
            object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        elif self.shape == "disk":
            if self.center is None or self.radius is None:
                raise ConfigError("disk patch needs 'center' and 'radius'")
            object.__setattr__(self, "center", tuple(float(v) for v in self.center))
            object.__setattr__(self, "radius", float(self.radius))
        else:
            raise ConfigError(f"unknown patch shape {self.shape!r}; expected 'rectangle' or 'disk'")

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean membership of in-plane points, boundary inclusive."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.shape == "rectangle":
            lo = np.asarray(self.lo)
            hi = np.asarray(self.hi)
            return np.all((pts >= lo) & (pts <= hi), axis=1)
        center = np.asarray(self.center)
        return np.sum((pts - center) ** 2, axis=1) <= self.radius**2

    def check_inside(self, domain: BoxDomain) -> None:
        """Raise :class:`ConfigError` unless the patch fits in the top face."""
        plane_lo = np.asarray(domain.lo[:-1])
        plane_hi = np.asarray(domain.hi[:-1])
        if self.shape == "rectangle":
            lo, hi = np.asarray(self.lo), np.asarray(self.hi)
            ok = np.all(lo >= plane_lo) and np.all(hi <= plane_hi) and np.all(hi >= lo)
        else:
            c = np.asarray(self.center)
            ok = np.all(c - self.radius >= plane_lo) and np.all(c + self.radius <= plane_hi)
        if not ok:
            raise ConfigError(f"Dirichlet patch {self} does not lie within the top face "
                              f"{plane_lo.tolist()} .. {plane_hi.tolist()}")


@dataclass(frozen=True)
class StructuredGrid:
    """One level of a nested vertex-centered rectilinear mesh.

    Attributes
    ----------
    domain : BoxDomain
    n : tuple of int
        Vertex counts per axis.
    level : int
        Hierarchy depth, 0 = coarsest.
    tags : ndarray of int8, shape (n_vertices,)
        Salt-BC classification, values from :class:`Tag` (never
        ``PRESSURE_PIN``; pins live in ``pressure_pin``).
    pressure_pin : ndarray of bool, shape (n_vertices,)
        Vertices where p = 0 is strongly enforced (top-face perimeter).
    """

    domain: BoxDomain
    n: tuple
    level: int
    tags: np.ndarray
    pressure_pin: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def spacing(self) -> tuple:
        return tuple(ext / (nk - 1) for ext, nk in zip(self.domain.extent, self.n))

    @property
    def n_vertices(self) -> int:
        return int(np.prod(self.n))

    @property
    def axes(self) -> tuple:
        """Per-axis vertex coordinate vectors."""
        if "axes" not in self._cache:
            self._cache["axes"] = tuple(
                np.linspace(l, h, nk) for l, h, nk in zip(self.domain.lo, self.domain.hi, self.n)
            )
        return self._cache["axes"]

    def coords(self) -> np.ndarray:
        """Vertex coordinates, shape (n_vertices, dim), axis 0 fastest."""
        if "coords" not in self._cache:
            mesh = np.meshgrid(*self.axes, indexing="ij")
            self._cache["coords"] = np.column_stack([m.ravel(order="F") for m in mesh])
        return self._cache["coords"]

    def dual_weights(self) -> tuple:
        """Per-axis 1D dual interval lengths (h/2 at the ends, h inside)."""
        if "dual_weights" not in self._cache:
            out = []
            for h, nk in zip(self.spacing, self.n):
                w = np.full(nk, h)
                w[0] = w[-1] = 0.5 * h
                out.append(w)
            self._cache["dual_weights"] = tuple(out)
        return self._cache["dual_weights"]

    def dual_volumes(self) -> np.ndarray:
        """Dual control volumes of all vertices; they sum to the box volume."""
        if "dual_volumes" not in self._cache:
            self._cache["dual_volumes"] = _tensor_outer(self.dual_weights())
        return self._cache["dual_volumes"]

    def faces(self) -> tuple:
        """Per-axis internal face sets of the dual mesh.

        For axis k, returns (idx_a, idx_b, area, h): flat indices of the
        lower/upper vertex of every vertex pair adjacent along axis k,
        the area of the shared dual face between them, and their
        distance.  In 2D "area" is a length.
        """
        if "faces" not in self._cache:
            out = []
            strides = _fortran_strides(self.n)
            for k in range(self.dim):
                counts = list(self.n)
                counts[k] -= 1
                grids = np.meshgrid(*[np.arange(c) for c in counts], indexing="ij")
                multi = [g.ravel(order="F") for g in grids]
                idx_a = sum(m * s for m, s in zip(multi, strides)).astype(np.int64)
                idx_b = idx_a + strides[k]
                trans_weights = [w for j, w in enumerate(self.dual_weights()) if j != k]
                trans_idx = [m for j, m in enumerate(multi) if j != k]
                area = np.ones(len(idx_a))
                for w, m in zip(trans_weights, trans_idx):
                    area = area * w[m]
                out.append((idx_a, idx_b, area, self.spacing[k]))
            self._cache["faces"] = tuple(out)
        return self._cache["faces"]

    def top_face_mask(self) -> np.ndarray:
        return _axis_index(self.n, self.dim - 1) == self.n[-1] - 1

    def is_dirichlet_c(self) -> np.ndarray:
        return (self.tags == Tag.DIRICHLET_FRESH) | (self.tags == Tag.DIRICHLET_BRINE)

    def dirichlet_c_values(self) -> np.ndarray:
        """Default salt Dirichlet data: 1 on the brine patch, 0 elsewhere."""
        vals = np.zeros(self.n_vertices)
        vals[self.tags == Tag.DIRICHLET_BRINE] = 1.0
        return vals


def _fortran_strides(n) -> tuple:
    strides = [1]
    for nk in n[:-1]:
        strides.append(strides[-1] * nk)
    return tuple(strides)


def _axis_index(n, axis) -> np.ndarray:
    """Per-vertex index along one axis, in flat (F-order) numbering."""
    grids = np.meshgrid(*[np.arange(nk) for nk in n], indexing="ij")
    return grids[axis].ravel(order="F")


def _tensor_outer(vectors) -> np.ndarray:
    """F-order flattened outer product of per-axis vectors."""
    mesh = np.meshgrid(*vectors, indexing="ij")
    return reduce(np.multiply, mesh).ravel(order="F")


def _classify(domain: BoxDomain, n, patch: DirichletPatch | None):
    dim = len(n)
    axis_idx = [_axis_index(n, k) for k in range(dim)]
    on_boundary = np.zeros(int(np.prod(n)), dtype=bool)
    for k in range(dim):
        on_boundary |= (axis_idx[k] == 0) | (axis_idx[k] == n[k] - 1)
    top = axis_idx[dim - 1] == n[dim - 1] - 1

    tags = np.full(int(np.prod(n)), Tag.INTERIOR, dtype=np.int8)
    tags[on_boundary] = Tag.NOFLUX
    tags[top] = Tag.DIRICHLET_FRESH
    if patch is not None:
        axes = [np.linspace(l, h, nk) for l, h, nk in zip(domain.lo, domain.hi, n)]
        plane = np.column_stack([axes[k][axis_idx[k]] for k in range(dim - 1)])
        tags[top & patch.contains(plane)] = Tag.DIRICHLET_BRINE

    # pressure pins: the perimeter of the top face (top vertices that
    # also lie on a lateral boundary)
    lateral = np.zeros_like(on_boundary)
    for k in range(dim - 1):
        lateral |= (axis_idx[k] == 0) | (axis_idx[k] == n[k] - 1)
    return tags, top & lateral


def build_grid(domain: BoxDomain, coarse_n, levels: int,
               patch: DirichletPatch | None = None) -> list[StructuredGrid]:
    """Build a nested grid hierarchy, finest first.

    Level ``l`` has ``(coarse_n - 1) * 2**l + 1`` vertices per axis, so
    consecutive levels nest exactly.  Every level carries the same
    boundary classification evaluated on its own vertices: top-face
    vertices inside ``patch`` are Dirichlet brine, the rest of the top
    face Dirichlet fresh, all other boundary vertices no-flux, and the
    top-face perimeter is additionally pressure-pinned.

    Parameters
    ----------
    domain : BoxDomain
    coarse_n : sequence of int
        Vertex counts per axis on the coarsest level, each >= 2.
    levels : int
        Number of levels, >= 1.
    patch : DirichletPatch, optional
        Brine source region; ``None`` leaves the whole top face fresh.

    Returns
    -------
    list of StructuredGrid, finest (level ``levels - 1``) first.
    """
    coarse_n = tuple(int(v) for v in coarse_n)
    if len(coarse_n) != domain.dim:
        raise ConfigError(f"coarse_n has {len(coarse_n)} entries for a {domain.dim}D domain")
    if any(nk < 2 for nk in coarse_n):
        raise ConfigError(f"coarse vertex counts must be >= 2, got {coarse_n}")
    if levels < 1:
        raise ConfigError(f"need at least one level, got {levels}")
    if patch is not None:
        patch.check_inside(domain)
    hierarchy = []
    for level in range(levels):
        n = tuple((nk - 1) * 2**level + 1 for nk in coarse_n)
        tags, pins = _classify(domain, n, patch)
        hierarchy.append(StructuredGrid(domain, n, level, tags, pins))
    return hierarchy[::-1]


def dual_volume(grid: StructuredGrid, vertex: int | None = None):
    """Dual volume of one vertex, or the full per-vertex array."""
    vols = grid.dual_volumes()
    return vols if vertex is None else float(vols[vertex])


class GridTransfer:
    """Multilinear transfer operators between two consecutive levels.

    Prolongation interpolates multilinearly on the nested lattice (the
    tensor product of 1D injection/midpoint stencils).  Restriction is
    the adjoint with respect to the dual-volume inner products,

        restrict(f) = Vc^{-1} P^T (Vf * f),

    which preserves constants exactly, including along boundaries, and
    satisfies <restrict(f), g>_Vc = <f, prolong(g)>_Vf with unit scale
    (the discrete L2 products weight by the dual volumes).  Coefficient
    fields are moved by plain injection at coincident vertices.
    """

    def __init__(self, fine: StructuredGrid, coarse: StructuredGrid):
        if fine.level != coarse.level + 1:
            raise ValueError(
                f"levels must be consecutive, got fine={fine.level}, coarse={coarse.level}"
            )
        if any(nf != 2 * (nc - 1) + 1 for nf, nc in zip(fine.n, coarse.n)):
            raise ValueError(f"grids do not nest: fine n={fine.n}, coarse n={coarse.n}")
        self.fine = fine
        self.coarse = coarse
        ops = [_prolongation_1d(nc) for nc in coarse.n]
        self.P = reduce(lambda a, b: sp.kron(b, a, format="csr"), ops)
        self._vf = fine.dual_volumes()
        self._vc = coarse.dual_volumes()

    def prolong(self, coarse_field: np.ndarray) -> np.ndarray:
        """Multilinear interpolation of a coarse vertex field."""
        return self.P @ np.asarray(coarse_field, dtype=float)

    def restrict(self, fine_field: np.ndarray) -> np.ndarray:
        """Volume-weighted full-weighting restriction of a fine field."""
        return (self.P.T @ (self._vf * np.asarray(fine_field, dtype=float))) / self._vc

    def restrict_residual(self, fine_residual: np.ndarray) -> np.ndarray:
        """Plain transpose transfer for integrated (residual) quantities."""
        return self.P.T @ np.asarray(fine_residual, dtype=float)

    def inject(self, fine_field: np.ndarray) -> np.ndarray:
        """Coarse field taking the fine value at each coincident vertex."""
        full = np.asarray(fine_field).reshape(self.fine.n, order="F")
        slicer = tuple(slice(None, None, 2) for _ in self.fine.n)
        return full[slicer].ravel(order="F")


def _prolongation_1d(n_coarse: int) -> sp.csr_matrix:
    n_fine = 2 * (n_coarse - 1) + 1
    rows, cols, vals = [], [], []
    for j in range(n_coarse):
        rows.append(2 * j)
        cols.append(j)
        vals.append(1.0)
    for j in range(n_coarse - 1):
        rows.extend([2 * j + 1, 2 * j + 1])
        cols.extend([j, j + 1])
        vals.extend([0.5, 0.5])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_fine, n_coarse))


def prolong(coarse_field, fine: StructuredGrid, coarse: StructuredGrid) -> np.ndarray:
    """Functional form of :meth:`GridTransfer.prolong`."""
    return GridTransfer(fine, coarse).prolong(coarse_field)


def restrict(fine_field, fine: StructuredGrid, coarse: StructuredGrid) -> np.ndarray:
    """Functional form of :meth:`GridTransfer.restrict`."""
    return GridTransfer(fine, coarse).restrict(fine_field)
