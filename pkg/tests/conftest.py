"""Shared fixtures: the reference particle, trap, and protocol.

The numbers describe the benchmark system used throughout the tests:
a 4.9e-17 kg silica particle of 174 nm radius in a 62/74/209 kHz trap,
released for 68 us per trial.
"""

import math

import pytest

from levitof.core import LibrationSpec, MotionalState, ParticleSpec, TrapSpec
from levitof.tofsim import TofProtocol


@pytest.fixture(scope="session")
def particle() -> ParticleSpec:
    return ParticleSpec(mass=4.9e-17, radius=174e-9)


@pytest.fixture(scope="session")
def trap() -> TrapSpec:
    return TrapSpec.from_hz(62e3, 74e3, 209e3)


@pytest.fixture(scope="session")
def protocol() -> TofProtocol:
    return TofProtocol(t_tof=68e-6, center_offset=0.0)


@pytest.fixture(scope="session")
def libration_broadened() -> LibrationSpec:
    # eps2 * delta_omega = 4.4e-6 m/s exactly
    return LibrationSpec(delta_omega=2.2e4, phi0=math.pi / 2, epsilon2=2.0e-10)


@pytest.fixture(scope="session")
def ground_state() -> MotionalState:
    return MotionalState(n_z=0.0)
