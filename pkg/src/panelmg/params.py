"""Experiment parameter space for the shell Helmholtz model problem.

The model equation

    -omega2 * (Lap_2d u + lambda2 * (1/r^2) d/dr (r^2 du/dr)) + u = f

is solved on a spherical shell of dimensionless depth H.  Both
dimensionless coefficients are fixed by the time step and the horizontal
resolution:

    omega2  = (alpha * c_h * dt / R_earth)^2
    lambda2 = 1 / (1 + (alpha * dt * N)^2)

with c_h the speed of the fastest waves, N the buoyancy frequency and
alpha the off-centering weight of the semi-implicit scheme.  This module
derives and validates one such configuration and the weak-scaling
schedule that keeps the acoustic Courant number c_h*dt/dx fixed while
the grid is refined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "PhysicalConstants",
    "ModelParameters",
    "derive_parameters",
    "weak_scaling_schedule",
    "anisotropy",
    "horizontal_coupling",
]


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PhysicalConstants:
    """Physical constants of the model problem (SI units where dimensional).

    Attributes
    ----------
    wave_speed : float
        Speed c_h of the fastest waves in the system [m/s].
    earth_radius : float
        Radius of the earth [m].
    buoyancy_freq : float
        Buoyancy frequency N of the background state [1/s].
    shell_depth : float
        Atmosphere depth divided by the earth radius (dimensionless H).
    off_centering : float
        Implicitness weight alpha of the time discretisation, in (0, 1].
    """

    wave_speed: float = 550.0
    earth_radius: float = 6.371e6
    buoyancy_freq: float = 0.018
    shell_depth: float = 0.01
    off_centering: float = 0.5

    def __post_init__(self):
        for name in ("wave_speed", "earth_radius", "buoyancy_freq", "shell_depth"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if not 0.0 < self.off_centering <= 1.0:
            raise ValueError("off_centering must lie in (0, 1]")


DEFAULT_CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class ModelParameters:
    """One point of the experiment parameter space.

    ``omega2`` and ``lambda2`` already include the robustness multipliers
    ``f_omega2`` and ``f_lambda2`` (both default 1); the multipliers are
    recorded so that reports can echo the base configuration.
    """

    nx: int
    nz: int
    dx: float
    dt: float
    omega2: float
    lambda2: float
    courant: float
    f_omega2: float = 1.0
    f_lambda2: float = 1.0

    def __post_init__(self):
        if not (self.nx >= 1 and is_power_of_two(self.nx)):
            raise ValueError("nx must be a power of two (horizontal coarsening halves it)")
        if self.nz < 1:
            raise ValueError("nz must be at least 1")
        for name in ("dx", "dt"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.omega2 < 0.0 or self.lambda2 < 0.0:
            raise ValueError("omega2 and lambda2 must be non-negative")

    @property
    def dof(self) -> int:
        return self.nx * self.nx * self.nz


def derive_parameters(
    nx: int,
    nz: int,
    dt: float,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
    f_omega2: float = 1.0,
    f_lambda2: float = 1.0,
) -> ModelParameters:
    """Derive the model coefficients for a grid resolution and time step.

    The horizontal spacing is estimated from the panel arc length,
    ``dx = 2*pi*R / (4*nx)``, and the dimensionless coefficients follow
    from the time step.  The robustness multipliers scale the base
    values after derivation.

    Raises
    ------
    ValueError
        If ``nx`` is not a power of two >= 4 (multigrid coarsening
        requires halving), ``nz`` < 2, or ``dt`` <= 0.
    """
    if not (isinstance(nx, int) and nx >= 4 and is_power_of_two(nx)):
        raise ValueError(f"nx must be a power of two >= 4, got {nx}")
    if nz < 2:
        raise ValueError(f"nz must be at least 2, got {nz}")
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if f_omega2 <= 0.0 or f_lambda2 <= 0.0:
        raise ValueError("robustness multipliers must be positive")

    c = constants
    dx = 2.0 * math.pi * c.earth_radius / (4.0 * nx)
    omega2 = (c.off_centering * c.wave_speed * dt / c.earth_radius) ** 2 * f_omega2
    lambda2 = f_lambda2 / (1.0 + (c.off_centering * dt * c.buoyancy_freq) ** 2)
    courant = c.wave_speed * dt / dx
    return ModelParameters(
        nx=nx, nz=nz, dx=dx, dt=dt,
        omega2=omega2, lambda2=lambda2, courant=courant,
        f_omega2=f_omega2, f_lambda2=f_lambda2,
    )


def weak_scaling_schedule(
    base: ModelParameters,
    doublings: int,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
) -> list[ModelParameters]:
    """Refinement schedule that holds the acoustic Courant number fixed.

    Entry ``i`` doubles ``nx`` and halves ``dt`` relative to entry
    ``i-1``; because both scalings are exact powers of two, the Courant
    number of every entry is bit-identical to the base one.
    """
    if doublings < 0:
        raise ValueError("doublings must be non-negative")
    out = []
    for i in range(doublings + 1):
        out.append(
            derive_parameters(
                base.nx * 2 ** i, base.nz, base.dt / 2 ** i,
                constants=constants,
                f_omega2=base.f_omega2, f_lambda2=base.f_lambda2,
            )
        )
    return out


def anisotropy(params: ModelParameters, grid, k: int,
               constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Vertical-to-horizontal coupling ratio beta = lambda2*(dx/dz_k)^2.

    ``dz_k`` is the physical thickness of vertical cell ``k`` of the
    graded grid, ``grid.levels`` scaled by the earth radius.
    """
    if not 0 <= k < grid.nz:
        raise ValueError(f"vertical cell index {k} out of range [0, {grid.nz})")
    dz = (grid.levels[k + 1] - grid.levels[k]) * constants.earth_radius
    return params.lambda2 * (params.dx / dz) ** 2


def horizontal_coupling(params: ModelParameters, level: int,
                        constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Strength of the horizontal off-diagonal coupling after ``level`` coarsenings.

    On the finest grid this is alpha^2*(c_h*dt/dx)^2; every coarsening
    doubles the grid spacing and therefore divides the coupling by four,
    which is why the coarse problems are well conditioned.
    """
    if level < 0:
        raise ValueError("coarsening depth must be non-negative")
    return (constants.off_centering * params.courant) ** 2 * 4.0 ** (-level)
