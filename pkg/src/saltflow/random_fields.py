"""Parametric porosity fields and derived permeability coefficients.

Each field maps spatial coordinates x and a parameter vector theta in
[-1, 1]^M to a porosity value; all fields are affine in every theta
component, so the mean field (theta integrated against the uniform
density) is the constant base porosity.  Permeability follows from the
Kozeny-Carman law of :mod:`saltflow.constitutive`.

Catalog
-------
``constant``
    phi = base everywhere; no random inputs (deterministic runs).
``paral_3rv``
    Three-variable trigonometric perturbation on the box
    [0, 600] x [0, 600] x [0, 150]:
    phi = 0.1 + 0.01 (t1 sin(pi x/600) + t2 sin(pi y/600) + t3 sin(pi z/150)
          + t1 sin(pi x/600) sin(pi y/600) + t2 sin(pi x/600) sin(pi z/150)).
``box_2rv``
    Two-variable x-z restriction of ``paral_3rv`` for 2D sections
    [0, 600] x [0, 150]:
    phi = 0.1 + 0.01 (t1 sin(pi x/600) + t2 sin(pi z/150)).
``paral_3rv_xz``
    The y = 300 m center-plane section of ``paral_3rv`` (where
    sin(pi y/600) = 1), keeping all three random variables:
    phi = 0.1 + 0.01 (2 t1 sin(pi x/600) + t2 (1 + sin(pi x/600)
          sin(pi z/150)) + t3 sin(pi z/150))
    on [0, 600] x [0, 150]; extreme realizations span [0.05, 0.15]
    like the parent field.
``cyl_3layer``
    Three-layer field on the bounding box [-300, 300] x [-150, 150]
    x [-150, 0] of the elliptic-cylinder reservoir:
    phi = 0.1 + 0.05 c0(z) (t1 (x/600) cos(pi x/300) + t2 sin(pi y/150)
          + t3 cos(pi x/300) sin(pi y/150)),
    c0 = 0.01 for z <= -100, 0.10 for -100 < z <= -50, 1.0 above.
    The x/600 scaling is kept exactly as printed even though the box
    spans x in [-300, 300]; see the package docs.
``layered_cz``
    Layered amplitude field on the same box:
    phi = 0.1 + c_z(z) (t1 cos(pi x/600) + t2 cos(pi y/300)
          + t3 sin(pi x/600) cos(pi z/150)),
    c_z = 0.01 on [-150, -100), 0.1 on [-100, -50), 1.0 on [-50, 0].
    With extreme theta this formula leaves (0, 1); realizations are then
    rejected by :func:`coefficient_fields`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constitutive import FlowParameters, kc_scaling_factor, kozeny_carman
from .discretization import CoefficientFields
from .errors import ConfigError, InvalidRealizationError
from .grid import BoxDomain, StructuredGrid

__all__ = ["PorosityFieldSpec", "porosity_at", "coefficient_fields", "FIELD_KINDS"]

FIELD_KINDS = ("constant", "paral_3rv", "box_2rv", "paral_3rv_xz", "cyl_3layer",
               "layered_cz")

_DEFAULT_DOMAINS = {
    "paral_3rv": ((0.0, 0.0, 0.0), (600.0, 600.0, 150.0)),
    "box_2rv": ((0.0, 0.0), (600.0, 150.0)),
    "paral_3rv_xz": ((0.0, 0.0), (600.0, 150.0)),
    "cyl_3layer": ((-300.0, -150.0, -150.0), (300.0, 150.0, 0.0)),
    "layered_cz": ((-300.0, -150.0, -150.0), (300.0, 150.0, 0.0)),
}

_DIM_THETA = {"constant": 0, "paral_3rv": 3, "box_2rv": 2, "paral_3rv_xz": 3,
              "cyl_3layer": 3, "layered_cz": 3}


@dataclass(frozen=True)
class PorosityFieldSpec:
    """Selects a porosity field and its geometry constants.

    ``domain`` bounds the admissible evaluation coordinates; the default
    is the reference box each formula was written for.  ``base`` is the
    unperturbed porosity (the mean over theta).
    """

    kind: str
    base: float = 0.1
    domain: BoxDomain | None = None
    dim_theta: int = field(init=False)

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ConfigError(f"unknown porosity field {self.kind!r}; expected one of {FIELD_KINDS}")
        if self.domain is None and self.kind != "constant":
            lo, hi = _DEFAULT_DOMAINS[self.kind]
            object.__setattr__(self, "domain", BoxDomain(lo, hi))
        object.__setattr__(self, "dim_theta", _DIM_THETA[self.kind])


def _check_theta(spec: PorosityFieldSpec, theta) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (spec.dim_theta,) and spec.dim_theta > 0:
        raise ValueError(f"field {spec.kind!r} needs {spec.dim_theta} random variables, "
                         f"got shape {theta.shape}")
    if spec.dim_theta and np.any(np.abs(theta) > 1.0 + 1e-12):
        raise ValueError(f"theta components must lie in [-1, 1], got {theta}")
    return theta


def _check_coords(spec: PorosityFieldSpec, x) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if spec.domain is not None:
        if pts.shape[1] != spec.domain.dim:
            raise ValueError(f"field {spec.kind!r} expects {spec.domain.dim}D coordinates, "
                             f"got {pts.shape[1]}D")
        lo = np.asarray(spec.domain.lo)
        hi = np.asarray(spec.domain.hi)
        tol = 1e-9 * max(spec.domain.extent)
        if np.any(pts < lo - tol) or np.any(pts > hi + tol):
            raise ValueError(f"coordinates outside the field domain {lo.tolist()}..{hi.tolist()}")
    return pts


def porosity_at(spec: PorosityFieldSpec, x, theta) -> np.ndarray:
    """Evaluate the selected field at coordinates ``x`` for one theta.

    ``x`` may be a single point (dim,) or a batch (n, dim).  The
    closed-form law is evaluated as written; the result may leave (0, 1)
    for extreme theta, which :func:`coefficient_fields` rejects.
    """
    theta = _check_theta(spec, theta)
    pts = _check_coords(spec, x)
    single = np.asarray(x).ndim == 1

    if spec.kind == "constant":
        out = np.full(pts.shape[0], spec.base)
    elif spec.kind == "paral_3rv":
        sx = np.sin(np.pi * pts[:, 0] / 600.0)
        sy = np.sin(np.pi * pts[:, 1] / 600.0)
        sz = np.sin(np.pi * pts[:, 2] / 150.0)
        out = spec.base + 0.01 * (theta[0] * sx + theta[1] * sy + theta[2] * sz
                                  + theta[0] * sx * sy + theta[1] * sx * sz)
    elif spec.kind == "box_2rv":
        sx = np.sin(np.pi * pts[:, 0] / 600.0)
        sz = np.sin(np.pi * pts[:, 1] / 150.0)
        out = spec.base + 0.01 * (theta[0] * sx + theta[1] * sz)
    elif spec.kind == "paral_3rv_xz":
        sx = np.sin(np.pi * pts[:, 0] / 600.0)
        sz = np.sin(np.pi * pts[:, 1] / 150.0)
        out = spec.base + 0.01 * (2.0 * theta[0] * sx
                                  + theta[1] * (1.0 + sx * sz) + theta[2] * sz)
    elif spec.kind == "cyl_3layer":
        cx = np.cos(np.pi * pts[:, 0] / 300.0)
        sy = np.sin(np.pi * pts[:, 1] / 150.0)
        z = pts[:, 2]
        c0 = np.where(z <= -100.0, 0.01, np.where(z <= -50.0, 0.10, 1.0))
        out = spec.base + 0.05 * c0 * (theta[0] * pts[:, 0] / 600.0 * cx
                                       + theta[1] * sy + theta[2] * cx * sy)
    else:  # layered_cz
        z = pts[:, 2]
        cz = np.where(z < -100.0, 0.01, np.where(z < -50.0, 0.1, 1.0))
        out = spec.base + cz * (theta[0] * np.cos(np.pi * pts[:, 0] / 600.0)
                                + theta[1] * np.cos(np.pi * pts[:, 1] / 300.0)
                                + theta[2] * np.sin(np.pi * pts[:, 0] / 600.0)
                                * np.cos(np.pi * z / 150.0))
    return float(out[0]) if single else out


def coefficient_fields(spec: PorosityFieldSpec, grid: StructuredGrid, theta,
                       params: FlowParameters) -> CoefficientFields:
    """Per-vertex porosity and Kozeny-Carman permeability for one realization.

    Raises :class:`InvalidRealizationError` (carrying the first
    offending vertex) if the realization leaves porosity (0, 1) at any
    vertex; the caller decides whether to abort the scenario or resample.
    """
    phi = np.asarray(porosity_at(spec, grid.coords(), theta), dtype=float)
    bad = np.flatnonzero((phi <= 0.0) | (phi >= 1.0))
    if bad.size:
        v = int(bad[0])
        raise InvalidRealizationError(
            f"porosity {phi[v]:.6g} outside (0, 1) at vertex {v} "
            f"(coords {grid.coords()[v].tolist()}, theta {np.asarray(theta).tolist()})",
            vertex=v, value=float(phi[v]))
    K = kozeny_carman(phi, kc_scaling_factor(params))
    return CoefficientFields(phi, K)
