"""Run configuration: YAML schema, defaults, validation, and builders.

A run file is a nested mapping; unknown keys are rejected and missing
keys fall back to the defaults below, so the effective config written
next to the outputs is always complete. User-facing frequencies are in
Hz and converted to angular frequencies exactly once, here.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import yaml

from .core import LibrationSpec, MotionalState, ParticleSpec, TrapSpec
from .errors import ConfigError
from .libration import AsymmetricGeometry
from .signals import FilterSpec
from .tofsim import CampaignConfig, ModelSelector, TofProtocol

DEFAULTS: dict = {
    "output_dir": "out",
    "seed": 12345,
    "particle": {
        "mass_kg": 4.9e-17,
        "radius_m": 174.0e-9,
    },
    "trap": {
        "frequency_x_hz": 62.0e3,
        "frequency_y_hz": 74.0e3,
        "frequency_z_hz": 209.0e3,
    },
    "state": {
        "n_x": 0.0,
        "n_y": 0.0,
        "n_z": 0.8,
    },
    "libration": {
        "delta_omega_hz": 3.5e3,
        "phi0_rad": math.pi / 2.0,
        "epsilon1_m": 6.7e-9,
        "epsilon2_m": 2.0e-10,
        "temperature_k": None,
    },
    "protocol": {
        "t_tof_s": 68.0e-6,
        "center_offset_m": 2.0e-9,
    },
    "simulate": {
        "model": "model2",
        "n_trials": 150,
    },
    "analyze": {
        "input": None,
        "n_bins": None,
        "bin_width": None,
    },
    "sweep": {
        "n_z_values": [0.8, 2.0, 5.0, 10.0, 20.0, 40.0],
        "n_trials": 10000,
        "model": "model2",
        "bootstrap_resamples": 500,
        "systematic_width_fraction": 0.0,
    },
    "libration_center": {
        "a_m": 174.0e-9,
        "ca_ratios": [1.0, 1.005, 1.01],
        "spread_threshold": 0.05,
    },
    "signal": {
        "n_trials": 200,
        "duration_s": 2.0e-4,
        "sample_rate_hz": 2.0e6,
        "noise_rms_m": 2.0e-10,
        "highpass_hz": 150.0e3,
        "lowpass_hz": 250.0e3,
        "filter_order": 4,
        "compensate_gain": True,
        "window": [0.1, 0.9],
        "calibration_temperature_k": 295.0,
        "dump_traces": 0,
    },
    "report": {
        "plots": True,
        "dpi": 130,
    },
}

_MODEL_NAMES = {m.value: m for m in ModelSelector}


def _merge(defaults, user, path=""):
    if isinstance(defaults, dict):
        if not isinstance(user, dict):
            raise ConfigError(f"{path or 'config'}: expected a mapping")
        out = {}
        for key, dval in defaults.items():
            sub = f"{path}.{key}" if path else key
            out[key] = _merge(dval, user[key], sub) if key in user else copy.deepcopy(dval)
        unknown = set(user) - set(defaults)
        if unknown:
            where = f"{path}." if path else ""
            raise ConfigError(f"unknown config key: {where}{sorted(unknown)[0]}")
        return out
    return copy.deepcopy(user)


def _num(cfg, path, minimum=None, strict=False, allow_none=False):
    node = cfg
    for part in path.split("."):
        node = node[part]
    if node is None:
        if allow_none:
            return None
        raise ConfigError(f"{path}: value required")
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {node!r}")
    val = float(node)
    if not math.isfinite(val):
        raise ConfigError(f"{path}: must be finite")
    if minimum is not None:
        if strict and not val > minimum:
            raise ConfigError(f"{path}: must be > {minimum}")
        if not strict and not val >= minimum:
            raise ConfigError(f"{path}: must be >= {minimum}")
    return val


@dataclass
class RunConfig:
    """Resolved run configuration plus the verbatim source text."""

    data: dict
    source_text: str
    path: str

    @property
    def seed(self) -> int:
        seed = self.data["seed"]
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ConfigError("seed: must be an unsigned 64-bit integer")
        return seed

    @property
    def output_dir(self) -> str:
        return str(self.data["output_dir"])

    def particle(self) -> ParticleSpec:
        return ParticleSpec(
            mass=_num(self.data, "particle.mass_kg", 0.0, strict=True),
            radius=_num(self.data, "particle.radius_m", 0.0, strict=True),
        )

    def trap(self) -> TrapSpec:
        return TrapSpec.from_hz(
            _num(self.data, "trap.frequency_x_hz", 0.0, strict=True),
            _num(self.data, "trap.frequency_y_hz", 0.0, strict=True),
            _num(self.data, "trap.frequency_z_hz", 0.0, strict=True),
        )

    def state(self, n_z: float | None = None) -> MotionalState:
        return MotionalState(
            n_x=_num(self.data, "state.n_x", 0.0),
            n_y=_num(self.data, "state.n_y", 0.0),
            n_z=_num(self.data, "state.n_z", 0.0) if n_z is None else float(n_z),
        )

    def libration(self) -> LibrationSpec:
        temp = _num(self.data, "libration.temperature_k", 0.0, allow_none=True)
        return LibrationSpec(
            delta_omega=2.0 * math.pi * _num(self.data, "libration.delta_omega_hz", 0.0),
            phi0=_num(self.data, "libration.phi0_rad", 0.0),
            epsilon1=_num(self.data, "libration.epsilon1_m", 0.0),
            epsilon2=_num(self.data, "libration.epsilon2_m", 0.0),
            temperature=temp,
        )

    def protocol(self) -> TofProtocol:
        return TofProtocol(
            t_tof=_num(self.data, "protocol.t_tof_s", 0.0, strict=True),
            center_offset=_num(self.data, "protocol.center_offset_m"),
        )

    def model(self, section: str) -> ModelSelector:
        name = self.data[section]["model"]
        if name not in _MODEL_NAMES:
            raise ConfigError(
                f"{section}.model: expected one of {sorted(_MODEL_NAMES)}, got {name!r}"
            )
        return _MODEL_NAMES[name]

    def campaign(
        self,
        section: str,
        n_z: float | None = None,
        stream: int = 0,
        model_section: str | None = None,
    ) -> CampaignConfig:
        n_trials = self.data[section]["n_trials"]
        if isinstance(n_trials, bool) or not isinstance(n_trials, int) or n_trials < 1:
            raise ConfigError(f"{section}.n_trials: must be an integer >= 1")
        return CampaignConfig(
            n_trials=n_trials,
            seed=self.seed,
            particle=self.particle(),
            trap=self.trap(),
            state=self.state(n_z),
            libration=self.libration(),
            protocol=self.protocol(),
            model=self.model(model_section or section),
            stream=stream,
        )

    def filter_spec(self) -> FilterSpec:
        sig = self.data["signal"]
        reference = None
        if sig["compensate_gain"]:
            reference = _num(self.data, "trap.frequency_z_hz", 0.0, strict=True)
        order = sig["filter_order"]
        if isinstance(order, bool) or not isinstance(order, int):
            raise ConfigError("signal.filter_order: must be an integer")
        return FilterSpec(
            highpass_cutoff=_num(self.data, "signal.highpass_hz", 0.0, strict=True),
            lowpass_cutoff=_num(self.data, "signal.lowpass_hz", 0.0, strict=True),
            order=order,
            gain_reference_hz=reference,
        )

    def geometry(self) -> AsymmetricGeometry:
        a = _num(self.data, "libration_center.a_m", 0.0, strict=True)
        return AsymmetricGeometry(a=a, c=a)

    def effective_yaml(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=True, default_flow_style=False)


def parse_config(text: str, path: str = "<memory>") -> RunConfig:
    """Parse and validate a YAML run config against the schema."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}: YAML parse error{where}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    merged = _merge(DEFAULTS, data)
    cfg = RunConfig(data=merged, source_text=text, path=path)
    _validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    # an unreadable config is the user's input, not an output failure
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    return parse_config(text, path=str(path))


def _validate(cfg: RunConfig) -> None:
    # construct every domain object once so bad values fail fast with a
    # key-path message, not deep inside a command
    cfg.seed
    cfg.particle()
    cfg.trap()
    cfg.state()
    cfg.libration()
    cfg.protocol()
    cfg.filter_spec()
    cfg.geometry()
    for section in ("simulate", "sweep"):
        cfg.model(section)
        n_trials = cfg.data[section]["n_trials"]
        if isinstance(n_trials, bool) or not isinstance(n_trials, int) or n_trials < 1:
            raise ConfigError(f"{section}.n_trials: must be an integer >= 1")
    n_z_values = cfg.data["sweep"]["n_z_values"]
    if not isinstance(n_z_values, list) or len(n_z_values) < 2:
        raise ConfigError("sweep.n_z_values: need a list of at least 2 occupations")
    for i, v in enumerate(n_z_values):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0:
            raise ConfigError(f"sweep.n_z_values[{i}]: must be a number >= 0")
    ratios = cfg.data["libration_center"]["ca_ratios"]
    if not isinstance(ratios, list) or not ratios:
        raise ConfigError("libration_center.ca_ratios: need a non-empty list")
    for i, v in enumerate(ratios):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 1.0:
            raise ConfigError(f"libration_center.ca_ratios[{i}]: must be a number >= 1")
    _num(cfg.data, "libration_center.spread_threshold", 0.0)
    _num(cfg.data, "sweep.systematic_width_fraction", 0.0)
    resamples = cfg.data["sweep"]["bootstrap_resamples"]
    if isinstance(resamples, bool) or not isinstance(resamples, int) or resamples < 100:
        raise ConfigError("sweep.bootstrap_resamples: must be an integer >= 100")
    sig = cfg.data["signal"]
    for key in ("n_trials", "dump_traces"):
        val = sig[key]
        if isinstance(val, bool) or not isinstance(val, int) or val < 0:
            raise ConfigError(f"signal.{key}: must be a non-negative integer")
    if sig["n_trials"] < 1:
        raise ConfigError("signal.n_trials: must be an integer >= 1")
    _num(cfg.data, "signal.duration_s", 0.0, strict=True)
    _num(cfg.data, "signal.sample_rate_hz", 0.0, strict=True)
    _num(cfg.data, "signal.noise_rms_m", 0.0)
    _num(cfg.data, "signal.calibration_temperature_k", 0.0, strict=True)
    window = sig["window"]
    if (
        not isinstance(window, list)
        or len(window) != 2
        or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in window)
        or not 0.0 <= float(window[0]) < float(window[1]) <= 1.0
    ):
        raise ConfigError("signal.window: expected [lo, hi] fractions with 0 <= lo < hi <= 1")
    if cfg.data["analyze"]["n_bins"] is not None and cfg.data["analyze"]["bin_width"] is not None:
        raise ConfigError("analyze: give n_bins or bin_width, not both")
    n_bins = cfg.data["analyze"]["n_bins"]
    if n_bins is not None and (
        isinstance(n_bins, bool) or not isinstance(n_bins, int) or n_bins < 1
    ):
        raise ConfigError("analyze.n_bins: must be an integer >= 1")
    _num(cfg.data, "analyze.bin_width", 0.0, strict=True, allow_none=True)
