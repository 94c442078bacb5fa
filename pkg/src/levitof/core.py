"""Physical constants, parameter records, and closed-form velocity widths.

All frequencies are stored as angular frequencies (rad/s). Conversions
from Hz happen once, at construction time, via ``TrapSpec.from_hz`` or
the config layer; nothing downstream mixes units.

Width convention: the velocity distribution is written as
``f(v) ~ exp(-(v - v_c)^2 / dv^2)``, so the width ``dv`` equals sqrt(2)
times the Gaussian standard deviation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, SubQuantumWidthError

TWO_PI = 2.0 * math.pi


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA values in SI units; treated as immutable."""

    hbar: float = 1.054571817e-34  # J s
    k_B: float = 1.380649e-23      # J/K


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class ParticleSpec:
    """Levitated particle: total mass (kg) and geometric radius (m)."""

    mass: float
    radius: float

    def __post_init__(self) -> None:
        _require(self.mass > 0, "particle mass must be positive")
        _require(self.radius > 0, "particle radius must be positive")


@dataclass(frozen=True)
class TrapSpec:
    """Harmonic trap angular frequencies along x, y, z in rad/s."""

    omega_x: float
    omega_y: float
    omega_z: float

    def __post_init__(self) -> None:
        _require(
            self.omega_x > 0 and self.omega_y > 0 and self.omega_z > 0,
            "trap angular frequencies must be positive",
        )

    @classmethod
    def from_hz(cls, f_x: float, f_y: float, f_z: float) -> "TrapSpec":
        """Build from ordinary frequencies in Hz."""
        return cls(TWO_PI * f_x, TWO_PI * f_y, TWO_PI * f_z)


@dataclass(frozen=True)
class MotionalState:
    """Mean phonon occupations of the translational modes."""

    n_x: float = 0.0
    n_y: float = 0.0
    n_z: float = 0.0

    def __post_init__(self) -> None:
        _require(
            self.n_x >= 0 and self.n_y >= 0 and self.n_z >= 0,
            "occupation numbers must be >= 0",
        )


@dataclass(frozen=True)
class LibrationSpec:
    """Librational state entering the displacement models.

    Parameters
    ----------
    delta_omega:
        Standard deviation of the angular velocity at release, rad/s.
    phi0:
        Orientation phase at the moment of release, rad, in [0, 2*pi).
        Held fixed over a campaign.
    epsilon1:
        Offset of the optical center from the center of mass, m.
    epsilon2:
        Offset of the libration center from the center of mass, m.
    temperature:
        Optional librational temperature in K, used for residual
        broadening predictions.
    """

    delta_omega: float = 0.0
    phi0: float = 0.0
    epsilon1: float = 0.0
    epsilon2: float = 0.0
    temperature: float | None = None

    def __post_init__(self) -> None:
        _require(self.delta_omega >= 0, "delta_omega must be >= 0")
        _require(self.epsilon1 >= 0, "epsilon1 must be >= 0")
        _require(self.epsilon2 >= 0, "epsilon2 must be >= 0")
        _require(0.0 <= self.phi0 < TWO_PI, "phi0 must lie in [0, 2*pi)")
        if self.temperature is not None:
            _require(self.temperature >= 0, "temperature must be >= 0")


def quantum_limited_width(particle: ParticleSpec, trap: TrapSpec) -> float:
    """Ground-state velocity width sqrt(hbar * Omega_z / m), in m/s."""
    return math.sqrt(CONSTANTS.hbar * trap.omega_z / particle.mass)


def velocity_width(
    particle: ParticleSpec,
    trap: TrapSpec,
    n_z: float,
    libration: LibrationSpec | None = None,
) -> float:
    """Velocity width dv at occupation n_z, including libration broadening.

    Returns sqrt(hbar*Omega_z*(2*n_z+1)/m + 2*(epsilon2*delta_omega)^2);
    with no libration spec (or delta_omega = 0) this is the purely
    thermal width.
    """
    _require(n_z >= 0, "n_z must be >= 0")
    thermal = CONSTANTS.hbar * trap.omega_z * (2.0 * n_z + 1.0) / particle.mass
    broadening = 0.0
    if libration is not None:
        broadening = 2.0 * (libration.epsilon2 * libration.delta_omega) ** 2
    return math.sqrt(thermal + broadening)


def occupation_from_width(
    width: float,
    particle: ParticleSpec,
    trap: TrapSpec,
    tol: float = 1e-6,
) -> float:
    """Invert the thermal width formula to the occupation number.

    Assumes no libration broadening. Widths below the quantum limit by
    more than the relative tolerance ``tol`` raise
    ``SubQuantumWidthError``; smaller deficits clamp to n_z = 0.
    """
    limit = quantum_limited_width(particle, trap)
    if width < limit * (1.0 - tol):
        raise SubQuantumWidthError(
            f"width {width:.6e} m/s lies below the quantum limit {limit:.6e} m/s"
        )
    n_z = (particle.mass * width * width / (CONSTANTS.hbar * trap.omega_z) - 1.0) / 2.0
    return max(n_z, 0.0)


def thermal_velocity_sigma(particle: ParticleSpec, trap: TrapSpec, n_z: float) -> float:
    """Gaussian sampling sigma of v0; equals the thermal width / sqrt(2)."""
    _require(n_z >= 0, "n_z must be >= 0")
    return math.sqrt(
        CONSTANTS.hbar * trap.omega_z * (2.0 * n_z + 1.0) / (2.0 * particle.mass)
    )


def sphere_moment_of_inertia(particle: ParticleSpec) -> float:
    """Moment of inertia (2/5) m R^2 of a homogeneous sphere, kg m^2."""
    return 0.4 * particle.mass * particle.radius**2


def residual_broadening_fraction(
    epsilon2: float,
    temperature: float,
    particle: ParticleSpec,
    trap: TrapSpec,
) -> float:
    """Fractional width excess over the quantum limit from thermal libration.

    The angular-velocity spread of a sphere in equilibrium at
    ``temperature`` is delta_omega = sqrt(k_B*T/I); the return value is
    velocity_width(n_z=0) / quantum_limited_width - 1 with that spread
    and the given libration-center offset.
    """
    _require(epsilon2 >= 0, "epsilon2 must be >= 0")
    _require(temperature >= 0, "temperature must be >= 0")
    inertia = sphere_moment_of_inertia(particle)
    delta_omega = math.sqrt(CONSTANTS.k_B * temperature / inertia)
    lib = LibrationSpec(delta_omega=delta_omega, epsilon2=epsilon2)
    return velocity_width(particle, trap, 0.0, lib) / quantum_limited_width(
        particle, trap
    ) - 1.0
