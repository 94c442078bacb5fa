"""Recapture-signal processing: synthesis, band-limiting, amplitude
extraction, and the equipartition displacement calibration.

The band filter is a zero-phase (forward-backward) Butterworth
high-pass/low-pass cascade. Because even a flat-passband filter
attenuates a 209 kHz tone noticeably between 150/250 kHz cutoffs when
applied twice, ``FilterSpec.gain_reference_hz`` lets the caller divide
out the exact zero-phase gain at the oscillation frequency; the
out-of-band suppression is unaffected.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .core import CONSTANTS, ParticleSpec, TrapSpec
from .errors import ConfigError, DataError, NumericsError

TRACE_FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled signal with a unit tag ('m' or 'V')."""

    sample_rate: float
    samples: np.ndarray
    units: str = "m"

    def __post_init__(self) -> None:
        if not self.sample_rate > 0:
            raise ConfigError("sample_rate must be positive")
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ConfigError("samples must be a non-empty 1-D array")
        object.__setattr__(self, "samples", arr)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class FilterSpec:
    """Butterworth band-limiting: high-pass then low-pass, zero phase.

    ``gain_reference_hz``, when set, rescales the filtered output by the
    inverse of the cascade's zero-phase magnitude response at that
    frequency, so an in-band tone there keeps its amplitude exactly.
    """

    highpass_cutoff: float
    lowpass_cutoff: float
    order: int = 4
    family: str = "butterworth"
    gain_reference_hz: float | None = None

    def __post_init__(self) -> None:
        if not 0 < self.highpass_cutoff < self.lowpass_cutoff:
            raise ConfigError("cutoffs must satisfy 0 < highpass < lowpass")
        if not 2 <= self.order <= 8:
            raise ConfigError("filter order must lie in [2, 8]")
        if self.family != "butterworth":
            raise ConfigError(f"unsupported filter family: {self.family!r}")
        if self.gain_reference_hz is not None and not self.gain_reference_hz > 0:
            raise ConfigError("gain_reference_hz must be positive")


@dataclass(frozen=True)
class CalibrationResult:
    """Displacement calibration: meters per signal unit and the thermal
    reference amplitude q0."""

    meters_per_unit: float
    q0: float


@dataclass(frozen=True)
class AmplitudeResult:
    """Demodulated oscillation amplitude with its noise-derived SNR."""

    amplitude: float
    snr: float
    low_confidence: bool


def synthesize_recapture(
    delta_z: float,
    v_rec: float,
    trap: TrapSpec,
    duration: float,
    rate: float,
    noise_rms: float = 0.0,
    rng: np.random.Generator | None = None,
) -> TimeSeries:
    """Model the in-trap oscillation after recapture.

    z(t) = delta_z*cos(Omega_z t) + (v_rec/Omega_z)*sin(Omega_z t) plus
    white Gaussian noise of the given RMS. Requires at least 10
    oscillation cycles and a sample rate above twice the oscillation
    frequency.
    """
    f_z = trap.omega_z / (2.0 * math.pi)
    if not duration * f_z >= 10.0:
        raise ConfigError("duration must cover at least 10 oscillation cycles")
    if not rate > 2.0 * f_z:
        raise ConfigError("sample rate must exceed twice the oscillation frequency")
    if noise_rms < 0:
        raise ConfigError("noise_rms must be >= 0")
    n = int(round(duration * rate))
    t = np.arange(n) / rate
    z = delta_z * np.cos(trap.omega_z * t) + (v_rec / trap.omega_z) * np.sin(
        trap.omega_z * t
    )
    if noise_rms > 0.0:
        if rng is None:
            raise ConfigError("an rng is required for noisy synthesis")
        z = z + noise_rms * rng.standard_normal(n)
    return TimeSeries(sample_rate=rate, samples=z, units="m")


def _design_sos(spec: FilterSpec, rate: float) -> np.ndarray:
    sos_hp = sps.butter(spec.order, spec.highpass_cutoff, btype="highpass", fs=rate, output="sos")
    sos_lp = sps.butter(spec.order, spec.lowpass_cutoff, btype="lowpass", fs=rate, output="sos")
    return np.vstack([sos_hp, sos_lp])


def zero_phase_gain(spec: FilterSpec, rate: float, freq_hz: float) -> float:
    """Magnitude response of the forward-backward cascade at one frequency."""
    if not 0 <= freq_hz < rate / 2.0:
        raise ConfigError("frequency must lie below Nyquist")
    _, h = sps.sosfreqz(_design_sos(spec, rate), worN=[freq_hz], fs=rate)
    return float(np.abs(h[0]) ** 2)  # applied forward and backward


def bandpass(ts: TimeSeries, spec: FilterSpec) -> TimeSeries:
    """Zero-phase band-limiting of a trace.

    Runs the Butterworth cascade forward and backward (no phase
    distortion, squared magnitude response) and, if the spec carries a
    gain reference, divides by the exact zero-phase gain there.
    """
    nyquist = ts.sample_rate / 2.0
    if spec.lowpass_cutoff >= nyquist or spec.highpass_cutoff >= nyquist:
        raise ConfigError("filter cutoffs must lie below Nyquist")
    sos = _design_sos(spec, ts.sample_rate)
    y = sps.sosfiltfilt(sos, ts.samples)
    if spec.gain_reference_hz is not None:
        gain = zero_phase_gain(spec, ts.sample_rate, spec.gain_reference_hz)
        if not gain > 1e-6:
            raise NumericsError("gain reference sits in the filter stopband")
        y = y / gain
    return TimeSeries(sample_rate=ts.sample_rate, samples=y, units=ts.units)


def extract_amplitude(
    ts: TimeSeries,
    trap: TrapSpec,
    window: tuple[float, float] = (0.1, 0.9),
) -> AmplitudeResult:
    """Oscillation amplitude at Omega_z by quadrature demodulation.

    Projects the analysis window onto cos(Omega_z t) and sin(Omega_z t)
    (multiply and average, i.e. boxcar low-pass), solving the 2x2
    normal equations so finite-window leakage cancels; the amplitude is
    the magnitude of the two quadratures. The SNR compares the
    amplitude against its own standard error from the residual noise;
    SNR < 3 flags the result as low-confidence.
    """
    lo_f, hi_f = window
    if not 0.0 <= lo_f < hi_f <= 1.0:
        raise ConfigError("window fractions must satisfy 0 <= lo < hi <= 1")
    n = ts.samples.size
    lo = int(n * lo_f)
    hi = int(n * hi_f)
    if hi - lo < 16:
        raise DataError("analysis window too short to demodulate")
    t = np.arange(lo, hi) / ts.sample_rate
    z = ts.samples[lo:hi]
    cos_t = np.cos(trap.omega_z * t)
    sin_t = np.sin(trap.omega_z * t)
    s_cc = float(cos_t @ cos_t)
    s_ss = float(sin_t @ sin_t)
    s_cs = float(cos_t @ sin_t)
    s_zc = float(z @ cos_t)
    s_zs = float(z @ sin_t)
    det = s_cc * s_ss - s_cs * s_cs
    if not det > 0 or not math.isfinite(det):
        raise NumericsError("demodulation window is degenerate")
    in_phase = (s_zc * s_ss - s_zs * s_cs) / det
    quadrature = (s_zs * s_cc - s_zc * s_cs) / det
    amplitude = math.hypot(in_phase, quadrature)
    residual = z - in_phase * cos_t - quadrature * sin_t
    noise_rms = float(np.sqrt(np.mean(residual**2)))
    sigma_amp = noise_rms * math.sqrt(2.0 / (hi - lo))
    snr = amplitude / sigma_amp if sigma_amp > 0 else math.inf
    return AmplitudeResult(amplitude=amplitude, snr=snr, low_confidence=snr < 3.0)


def calibrate_equipartition(
    measured_variance: float,
    temperature: float,
    particle: ParticleSpec,
    trap: TrapSpec,
) -> CalibrationResult:
    """Displacement calibration against the thermal oscillation amplitude.

    The reference amplitude satisfies m*Omega_z^2*q0^2 = 2*k_B*T
    (equipartition of the total oscillator energy), so
    q0 = sqrt(2*k_B*T/m)/Omega_z; a sinusoid of amplitude q0 has
    variance q0^2/2, giving meters_per_unit =
    q0/sqrt(2*measured_variance).
    """
    if not measured_variance > 0:
        raise DataError("measured variance must be positive")
    if not temperature > 0:
        raise ConfigError("calibration temperature must be positive")
    q0 = math.sqrt(2.0 * CONSTANTS.k_B * temperature / particle.mass) / trap.omega_z
    return CalibrationResult(
        meters_per_unit=q0 / math.sqrt(2.0 * measured_variance), q0=q0
    )


def write_trace(path, ts: TimeSeries) -> None:
    """Write a trace as two-column CSV with a one-line header declaring
    units and sample rate."""
    with open(path, "w", newline="") as fh:
        fh.write(
            f"# time_s,value units={ts.units} sample_rate_hz={ts.sample_rate:.17g}\n"
        )
        writer = csv.writer(fh)
        t = np.arange(ts.samples.size) / ts.sample_rate
        for ti, vi in zip(t, ts.samples):
            writer.writerow([TRACE_FLOAT_FMT % ti, TRACE_FLOAT_FMT % vi])


def read_trace(path) -> TimeSeries:
    """Read a trace written by ``write_trace``."""
    with open(path, newline="") as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise DataError("trace file lacks the units/sample-rate header")
        fields = dict(
            part.split("=", 1) for part in header[1:].split() if "=" in part
        )
        try:
            rate = float(fields["sample_rate_hz"])
            units = fields.get("units", "m")
        except (KeyError, ValueError) as exc:
            raise DataError(f"malformed trace header: {header.strip()!r}") from exc
        values = []
        for lineno, row in enumerate(csv.reader(fh), start=2):
            if not row:
                continue
            try:
                values.append(float(row[1]))
            except (IndexError, ValueError) as exc:
                raise DataError(f"trace row {lineno}: malformed sample") from exc
    return TimeSeries(sample_rate=rate, samples=np.asarray(values), units=units)
