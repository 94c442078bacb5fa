"""Monte Carlo engine for release-and-recapture displacement trials.

Random numbers come from counter-keyed Philox generators: trial block b
of a campaign uses the key (seed, stream*2^32 + b), and every block
always draws its full quota even when the campaign ends mid-block.
Trial i therefore depends only on (seed, stream, i), independent of the
campaign length and of how blocks are partitioned across workers.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .core import (
    LibrationSpec,
    MotionalState,
    ParticleSpec,
    TrapSpec,
    thermal_velocity_sigma,
)
from .errors import ConfigError

RNG_BLOCK = 4096          # trials drawn per generator block
MAX_STREAM = 1 << 31      # streams and blocks share one 64-bit key word


class ModelSelector(enum.Enum):
    """Displacement model applied to the sampled initial conditions."""

    MODEL1 = "model1"  # optical center pinned to the trap; oscillatory term
    MODEL2 = "model2"  # libration center offset; linear omega0 coupling
    PURE = "pure"      # translation only


@dataclass(frozen=True)
class TofProtocol:
    """Free-flight duration and constant recapture-center offset.

    ``center_offset`` models the fixed displacement of the distribution
    center (radiation-pressure shift during the trap-off window); it is
    added once to every trial and fitted out later as the Gaussian
    center.
    """

    t_tof: float
    center_offset: float = 0.0

    def __post_init__(self) -> None:
        if not self.t_tof > 0:
            raise ConfigError("t_tof must be positive")
        if not np.isfinite(self.center_offset):
            raise ConfigError("center_offset must be finite")


@dataclass(frozen=True)
class TofTrial:
    """One release-and-recapture cycle: initial conditions and outcome."""

    v0: float
    omega0: float
    delta_z: float


@dataclass(frozen=True)
class CampaignConfig:
    """Everything needed to reproduce a campaign bit for bit.

    ``stream`` selects an independent substream under the same seed so
    multi-campaign runs (occupation sweeps) stay decorrelated without
    juggling seeds.
    """

    n_trials: int
    seed: int
    particle: ParticleSpec
    trap: TrapSpec
    state: MotionalState
    libration: LibrationSpec
    protocol: TofProtocol
    model: ModelSelector
    stream: int = 0

    def __post_init__(self) -> None:
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not 0 <= self.stream < MAX_STREAM:
            raise ConfigError(f"stream must lie in [0, {MAX_STREAM})")


class TrialSet:
    """Column-stored campaign results; behaves as a sequence of TofTrial."""

    __slots__ = ("v0", "omega0", "delta_z")

    def __init__(self, v0: np.ndarray, omega0: np.ndarray, delta_z: np.ndarray):
        self.v0 = np.asarray(v0, dtype=float)
        self.omega0 = np.asarray(omega0, dtype=float)
        self.delta_z = np.asarray(delta_z, dtype=float)
        if not (self.v0.shape == self.omega0.shape == self.delta_z.shape):
            raise ValueError("column lengths differ")

    def __len__(self) -> int:
        return self.v0.size

    def __getitem__(self, i):
        if isinstance(i, slice):
            return TrialSet(self.v0[i], self.omega0[i], self.delta_z[i])
        return TofTrial(float(self.v0[i]), float(self.omega0[i]), float(self.delta_z[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


def counter_rng(seed: int, index: int) -> np.random.Generator:
    """Philox generator keyed by (seed, index); independent per index."""
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_initial_conditions(
    rng: np.random.Generator,
    sigma_v: float,
    delta_omega: float,
    n: int | None = None,
):
    """Draw independent Gaussian (v0, omega0) pairs.

    Returns a scalar pair when ``n`` is None, else two arrays of shape
    (n,). Each trial consumes one pair from consecutive stream
    positions, so trial i sees the same values regardless of how many
    trials follow it.
    """
    if sigma_v < 0 or delta_omega < 0:
        raise ConfigError("sigma_v and delta_omega must be >= 0")
    m = 1 if n is None else int(n)
    pairs = rng.standard_normal((m, 2))
    v0 = pairs[:, 0] * sigma_v
    omega0 = pairs[:, 1] * delta_omega
    if n is None:
        return float(v0[0]), float(omega0[0])
    return v0, omega0


def displacement_model1(v0, omega0, epsilon1, phi0, t_tof):
    """Free-flight displacement with the optical center pinned to the trap.

    The center of mass rides on the libration of the offset optical
    center: v0*t + eps1*omega0*t*sin(phi0) + eps1*(cos(phi0 + omega0*t)
    - cos(phi0)). Accepts scalars or arrays.
    """
    wt = np.multiply(omega0, t_tof)
    return (
        np.multiply(v0, t_tof)
        + epsilon1 * wt * np.sin(phi0)
        + epsilon1 * (np.cos(phi0 + wt) - np.cos(phi0))
    )


def displacement_model2(v0, omega0, epsilon2, phi0, t_tof):
    """Free-flight displacement with an offset libration center.

    The angular velocity adds a velocity-like kick:
    v0*t + eps2*omega0*t*sin(phi0). Accepts scalars or arrays.
    """
    return np.multiply(v0 + epsilon2 * np.multiply(omega0, np.sin(phi0)), t_tof)


def run_campaign(config: CampaignConfig) -> TrialSet:
    """Run every trial of a campaign and return the column-stored results.

    Deterministic: identical config (including seed and stream) gives
    bit-identical output, and the first k trials of a campaign equal any
    shorter campaign of k trials with the same seed/stream.
    """
    if config.trap.omega_z * config.protocol.t_tof < 10.0:
        warnings.warn(
            "Omega_z * t_tof < 10: flight time is short against the trap "
            "period; displacement-to-velocity conversion degrades",
            stacklevel=2,
        )
    sigma_v = thermal_velocity_sigma(config.particle, config.trap, config.state.n_z)
    lib = config.libration
    n = config.n_trials
    v0 = np.empty(n)
    omega0 = np.empty(n)
    n_blocks = (n + RNG_BLOCK - 1) // RNG_BLOCK
    for block in range(n_blocks):
        lo = block * RNG_BLOCK
        hi = min(lo + RNG_BLOCK, n)
        rng = counter_rng(config.seed, (config.stream << 32) | block)
        # full-quota draw even for a truncated final block, so trial
        # values never depend on the campaign length
        bv, bw = sample_initial_conditions(rng, sigma_v, lib.delta_omega, RNG_BLOCK)
        v0[lo:hi] = bv[: hi - lo]
        omega0[lo:hi] = bw[: hi - lo]

    t = config.protocol.t_tof
    if config.model is ModelSelector.MODEL1:
        delta_z = displacement_model1(v0, omega0, lib.epsilon1, lib.phi0, t)
    elif config.model is ModelSelector.MODEL2:
        delta_z = displacement_model2(v0, omega0, lib.epsilon2, lib.phi0, t)
    else:
        delta_z = v0 * t
    delta_z = delta_z + config.protocol.center_offset
    return TrialSet(v0, omega0, delta_z)
