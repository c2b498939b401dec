"""Physical constants and constitutive laws of the brine transport model.

The liquid is a water/brine mixture whose density is affine in the brine
mass fraction; viscosity is constant.  The porous matrix is isotropic with
a scalar permeability tied to porosity through a Kozeny-Carman-like law,

    K(phi) = kappa * phi**3 / (1 - phi**2),

where the scaling factor ``kappa`` is fixed so that the mean porosity
reproduces the mean permeability exactly.  All quantities are strict SI.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["FlowParameters", "density", "kc_scaling_factor", "kozeny_carman"]


@dataclass(frozen=True)
class FlowParameters:
    """Physical constants of the flow problem (SI units).

    Attributes
    ----------
    rho0 : float
        Density of pure water [kg m^-3].
    rho1 : float
        Density of saturated brine [kg m^-3].
    mu : float
        Dynamic viscosity of the liquid [kg m^-1 s^-1]; constant, no
        dependence on the mass fraction.
    Dm : float
        Molecular diffusion coefficient [m^2 s^-1].
    g : float
        Gravitational acceleration magnitude [m s^-2].  Gravity acts in
        the negative direction of ``gravity_axis``.
    gravity_axis : int
        Index of the vertical coordinate axis (negative indices count
        from the last axis, so the default -1 means "last axis is up").
    phi_mean : float
        Mean porosity [-].
    K_mean : float
        Mean scalar permeability [m^2].
    """

    rho0: float = 1000.0
    rho1: float = 1200.0
    mu: float = 1.0e-3
    Dm: float = 0.565e-6
    g: float = 9.81
    gravity_axis: int = -1
    phi_mean: float = 0.1
    K_mean: float = 4.845e-13

    def __post_init__(self):
        if not self.rho1 > self.rho0 > 0.0:
            raise ValueError(f"require rho1 > rho0 > 0, got rho0={self.rho0}, rho1={self.rho1}")
        if self.mu <= 0.0:
            raise ValueError(f"viscosity must be positive, got {self.mu}")
        if self.Dm < 0.0:
            raise ValueError(f"diffusion coefficient must be nonnegative, got {self.Dm}")
        if self.g < 0.0:
            raise ValueError(f"gravity magnitude must be nonnegative, got {self.g}")
        if not 0.0 < self.phi_mean < 1.0:
            raise ValueError(f"mean porosity must lie in (0, 1), got {self.phi_mean}")
        if self.K_mean <= 0.0:
            raise ValueError(f"mean permeability must be positive, got {self.K_mean}")

    @property
    def drho(self) -> float:
        """Density contrast rho1 - rho0 [kg m^-3]."""
        return self.rho1 - self.rho0


def density(c, params: FlowParameters):
    """Liquid density as an affine function of the brine mass fraction.

    Evaluates ``rho0 + (rho1 - rho0) * c`` elementwise; values of ``c``
    outside [0, 1] are permitted and the law is applied as written.
    """
    return params.rho0 + params.drho * np.asarray(c, dtype=float)


def kc_scaling_factor(params: FlowParameters) -> float:
    """Kozeny-Carman scaling factor kappa [m^2].

    Chosen so that ``kozeny_carman(phi_mean, kappa) == K_mean`` exactly:
    ``kappa = K_mean * (1 - phi_mean**2) / phi_mean**3``.
    """
    phi = params.phi_mean
    if not 0.0 < phi < 1.0:
        raise ValueError(f"mean porosity must lie in (0, 1), got {phi}")
    return params.K_mean * (1.0 - phi * phi) / phi**3


def kozeny_carman(phi, kappa):
    """Scalar permeability K(phi) = kappa * phi^3 / (1 - phi^2) [m^2].

    Monotone increasing on (0, 1); singular at phi = 1.  Raises
    ``ValueError`` if any porosity value lies outside (0, 1).
    """
    phi = np.asarray(phi, dtype=float)
    if np.any(phi <= 0.0) or np.any(phi >= 1.0):
        bad = phi[(phi <= 0.0) | (phi >= 1.0)]
        raise ValueError(f"porosity outside (0, 1): {bad.flat[0]}")
    return kappa * phi**3 / (1.0 - phi * phi)
