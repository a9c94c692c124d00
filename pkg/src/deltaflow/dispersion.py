"""Slowness and wavenumbers for the two wave models.

Helmholtz (alpha=1): eta = 1/c. Thin-plate bending (alpha=2): eta = sqrt(omega)/c_b,
which for a plate of thickness h reduces to (12 rho (1 - nu^2) / (E h^2))^(1/4).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

ALPHA = {"helmholtz": 1, "biharmonic": 2}


@dataclass(frozen=True)
class PlateMaterial:
    thickness: float
    youngs: float
    density: float
    poisson: float

    def __post_init__(self):
        if min(self.thickness, self.youngs, self.density) <= 0 or not 0 < self.poisson < 0.5:
            raise ValueError("plate constants must be positive and 0 < poisson < 0.5")

    @property
    def slowness(self) -> float:
        return bending_slowness(self.youngs, self.density, self.poisson, self.thickness)

    def wavenumber(self, omega: float) -> float:
        return self.slowness * math.sqrt(omega)


ALUMINIUM_SHELL = PlateMaterial(thickness=2.5e-3, youngs=7.0e10, density=2700.0, poisson=0.33)
SHELL_OMEGA = 18000 * math.pi


def bending_slowness(youngs: float, density: float, poisson: float, thickness: float) -> float:
    return (12 * density * (1 - poisson**2) / (youngs * thickness**2)) ** 0.25


def helmholtz_slowness(c: float) -> float:
    return 1.0 / c


def hysteretic_damping(loss_fraction: float, k: float) -> float:
    """Spatial decay coefficient mu = loss_fraction * k / 2."""
    return loss_fraction * k / 2
