"""Time-of-flight velocimetry toolkit for a levitated nanoparticle.

Simulates free-fall displacement campaigns near the motional ground
state, fits the resulting velocity distributions, locates the libration
center of an asymmetric rotor, and recovers recapture amplitudes from
band-filtered traces.
"""

__version__ = "0.1.0"

from .core import (
    CONSTANTS,
    LibrationSpec,
    MotionalState,
    ParticleSpec,
    PhysicalConstants,
    TrapSpec,
    occupation_from_width,
    quantum_limited_width,
    residual_broadening_fraction,
    sphere_moment_of_inertia,
    thermal_velocity_sigma,
    velocity_width,
)
from .errors import (
    ConfigError,
    DataError,
    FitError,
    LevitofError,
    NumericsError,
    RootBracketError,
    SubQuantumWidthError,
)
from .tofsim import (
    CampaignConfig,
    ModelSelector,
    TofProtocol,
    TofTrial,
    TrialSet,
    counter_rng,
    run_campaign,
)

__all__ = [
    "__version__",
    "CONSTANTS",
    "PhysicalConstants",
    "ParticleSpec",
    "TrapSpec",
    "MotionalState",
    "LibrationSpec",
    "quantum_limited_width",
    "velocity_width",
    "occupation_from_width",
    "thermal_velocity_sigma",
    "sphere_moment_of_inertia",
    "residual_broadening_fraction",
    "TofProtocol",
    "TofTrial",
    "TrialSet",
    "CampaignConfig",
    "ModelSelector",
    "counter_rng",
    "run_campaign",
    "LevitofError",
    "ConfigError",
    "DataError",
    "NumericsError",
    "SubQuantumWidthError",
    "FitError",
    "RootBracketError",
]
