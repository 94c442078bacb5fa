"""Width/occupation formulas and the validated input types.

Expected numbers are frozen from independent hand evaluations of the
defining formulas (sqrt(hbar*Omega_z*(2n+1)/m + 2*(eps2*dw)^2) and
friends), not from the code under test.
"""

import math

import pytest

from levitof.core import (
    CONSTANTS,
    LibrationSpec,
    MotionalState,
    ParticleSpec,
    TrapSpec,
    occupation_from_width,
    quantum_limited_width,
    residual_broadening_fraction,
    sphere_moment_of_inertia,
    thermal_velocity_sigma,
    velocity_width,
)
from levitof.errors import ConfigError, SubQuantumWidthError


def test_quantum_limited_width_frozen(particle, trap):
    assert quantum_limited_width(particle, trap) == pytest.approx(
        1.6811370426367574e-06, rel=1e-12
    )


def test_quantum_limited_width_near_reference(particle, trap):
    # benchmark system is quoted as 1.7 um/s at the ground state
    assert quantum_limited_width(particle, trap) == pytest.approx(1.7e-6, rel=0.02)


def test_velocity_width_ground_state_equals_limit(particle, trap):
    assert velocity_width(particle, trap, 0.0) == quantum_limited_width(particle, trap)


def test_velocity_width_frozen_thermal(particle, trap):
    assert velocity_width(particle, trap, 0.8) == pytest.approx(
        2.710752029589981e-06, rel=1e-12
    )


def test_velocity_width_frozen_broadened(particle, trap, libration_broadened):
    assert velocity_width(particle, trap, 0.87, libration_broadened) == pytest.approx(
        6.816439511341956e-06, rel=1e-12
    )


def test_velocity_width_quadrature_identity(particle, trap):
    lib = LibrationSpec(delta_omega=9.0e3, epsilon2=3.0e-10)
    for n_z in (0.0, 0.8, 7.3):
        total = velocity_width(particle, trap, n_z, lib)
        thermal = velocity_width(particle, trap, n_z)
        assert total**2 - thermal**2 == pytest.approx(
            2.0 * (lib.epsilon2 * lib.delta_omega) ** 2, rel=1e-9
        )


def test_velocity_width_monotone_in_occupation(particle, trap):
    widths = [velocity_width(particle, trap, n) for n in (0.0, 0.5, 1.0, 5.0, 40.0)]
    assert widths == sorted(widths)
    assert widths[0] < widths[-1]


def test_velocity_width_rejects_negative_occupation(particle, trap):
    with pytest.raises(ConfigError):
        velocity_width(particle, trap, -0.1)


def test_occupation_from_width_frozen(particle, trap):
    assert occupation_from_width(3.5e-6, particle, trap) == pytest.approx(
        1.6672043202996618, rel=1e-12
    )


@pytest.mark.parametrize("n_z", [0.0, 0.8, 0.87, 12.5, 40.0])
def test_occupation_width_roundtrip(particle, trap, n_z):
    width = velocity_width(particle, trap, n_z)
    assert occupation_from_width(width, particle, trap) == pytest.approx(
        n_z, abs=1e-9
    )


def test_occupation_clamps_tiny_deficit(particle, trap):
    width = quantum_limited_width(particle, trap) * (1.0 - 1e-8)
    assert occupation_from_width(width, particle, trap) == 0.0


def test_occupation_rejects_sub_quantum_width(particle, trap):
    with pytest.raises(SubQuantumWidthError):
        occupation_from_width(0.9 * quantum_limited_width(particle, trap), particle, trap)


def test_thermal_sigma_frozen(particle, trap):
    assert thermal_velocity_sigma(particle, trap, 0.0) == pytest.approx(
        1.1887434029523493e-06, rel=1e-12
    )
    assert thermal_velocity_sigma(particle, trap, 0.8) == pytest.approx(
        1.9167911422382723e-06, rel=1e-12
    )


def test_width_is_sqrt2_times_sampling_sigma(particle, trap):
    for n_z in (0.0, 0.8, 3.0):
        assert velocity_width(particle, trap, n_z) == pytest.approx(
            math.sqrt(2.0) * thermal_velocity_sigma(particle, trap, n_z), rel=1e-12
        )


def test_sphere_moment_of_inertia(particle):
    assert sphere_moment_of_inertia(particle) == pytest.approx(
        5.9340959999999995e-31, rel=1e-12
    )
    assert sphere_moment_of_inertia(particle) == pytest.approx(
        0.4 * particle.mass * particle.radius**2, rel=1e-15
    )


def test_residual_broadening_frozen(particle, trap):
    # 2.0e-10 m offset thermalized at 30 mK: about 1% of the limit
    frac = residual_broadening_fraction(2.0e-10, 30e-3, particle, trap)
    assert frac == pytest.approx(0.009830470292546245, rel=1e-12)
    assert 0.005 < frac < 0.015


def test_residual_broadening_limits(particle, trap):
    assert residual_broadening_fraction(0.0, 30e-3, particle, trap) == 0.0
    cold = residual_broadening_fraction(2.0e-10, 1e-3, particle, trap)
    warm = residual_broadening_fraction(2.0e-10, 300e-3, particle, trap)
    assert 0.0 < cold < warm


def test_residual_broadening_consistent_with_width(particle, trap):
    inertia = sphere_moment_of_inertia(particle)
    delta_omega = math.sqrt(CONSTANTS.k_B * 30e-3 / inertia)
    lib = LibrationSpec(delta_omega=delta_omega, epsilon2=2.0e-10)
    expected = velocity_width(particle, trap, 0.0, lib) / quantum_limited_width(
        particle, trap
    ) - 1.0
    assert residual_broadening_fraction(2.0e-10, 30e-3, particle, trap) == pytest.approx(
        expected, rel=1e-12
    )


def test_trap_from_hz_matches_radians():
    by_hz = TrapSpec.from_hz(62e3, 74e3, 209e3)
    direct = TrapSpec(
        omega_x=2 * math.pi * 62e3,
        omega_y=2 * math.pi * 74e3,
        omega_z=2 * math.pi * 209e3,
    )
    assert by_hz == direct


@pytest.mark.parametrize(
    "factory",
    [
        lambda: ParticleSpec(mass=0.0, radius=174e-9),
        lambda: ParticleSpec(mass=4.9e-17, radius=-1e-9),
        lambda: TrapSpec(omega_x=-1.0, omega_y=1.0, omega_z=1.0),
        lambda: MotionalState(n_z=-0.1),
        lambda: LibrationSpec(delta_omega=-1.0),
        lambda: LibrationSpec(epsilon1=-1e-9),
        lambda: LibrationSpec(epsilon2=-1e-10),
        lambda: LibrationSpec(phi0=7.0),
        lambda: LibrationSpec(phi0=-0.1),
        lambda: LibrationSpec(temperature=-1.0),
    ],
)
def test_invalid_specs_rejected(factory):
    with pytest.raises(ConfigError):
        factory()
