"""Command-line front end tying the modules into reproducible runs.

Every command reads one YAML config, writes its data files plus the
verbatim and effective configs into the output directory, renders the
matching figures (unless disabled), and finishes with manifest.json.
Exit codes: 0 success, 2 config/input error, 3 numerical failure,
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys

import numpy as np

from . import __version__, analysis, report
from .config import RunConfig, load_config
from .core import CONSTANTS, occupation_from_width
from .errors import (
    ConfigError,
    DataError,
    LevitofError,
    NumericsError,
    SubQuantumWidthError,
)
from .libration import sweep_asymmetry
from .runio import write_csv, write_json, write_manifest
from .signals import (
    bandpass,
    calibrate_equipartition,
    extract_amplitude,
    synthesize_recapture,
    write_trace,
    zero_phase_gain,
)
from .tofsim import counter_rng, run_campaign

_NOISE_BASE = 1 << 63  # counter-RNG namespace for synthesis noise


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levitof",
        description="Time-of-flight velocity campaigns for a levitated "
        "nanoparticle: simulation, statistics, libration geometry, and "
        "signal processing.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML run configuration")
    common.add_argument("--out", help="output directory (overrides config and env)")
    common.add_argument("--seed", type=int, help="RNG seed (overrides config and env)")
    common.add_argument(
        "--trials", type=int, help="trial-count override for the active command"
    )
    common.add_argument(
        "--no-plot", action="store_true", help="skip figure rendering"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser(
        "simulate", parents=[common], help="run a displacement campaign"
    )
    analyze = sub.add_parser(
        "analyze", parents=[common], help="fit and summarize a sample file"
    )
    analyze.add_argument(
        "--input", help="trials.csv or velocity CSV (overrides analyze.input)"
    )
    sub.add_parser(
        "sweep", parents=[common], help="occupation sweep and width-curve fit"
    )
    sub.add_parser(
        "libration-center",
        parents=[common],
        help="libration-center offset versus asymmetry",
    )
    signal = sub.add_parser(
        "signal", parents=[common], help="synthesize, filter, and recover traces"
    )
    signal.add_argument(
        "--dump-traces",
        type=int,
        help="write the first N synthesized traces as CSV",
    )
    return parser


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> None:
    # precedence: CLI flag > environment > config file
    env_seed = os.environ.get("LEVITOF_SEED")
    if env_seed is not None:
        try:
            cfg.data["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError("LEVITOF_SEED must be an integer") from None
    env_out = os.environ.get("LEVITOF_OUT")
    if env_out:
        cfg.data["output_dir"] = env_out
    if args.seed is not None:
        cfg.data["seed"] = args.seed
    if args.out is not None:
        cfg.data["output_dir"] = args.out
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("--trials must be >= 1")
        section = {"simulate": "simulate", "sweep": "sweep", "signal": "signal"}.get(
            args.command
        )
        if section is not None:
            cfg.data[section]["n_trials"] = args.trials
    if args.no_plot:
        cfg.data["report"]["plots"] = False
    if getattr(args, "dump_traces", None) is not None:
        if args.dump_traces < 0:
            raise ConfigError("--dump-traces must be >= 0")
        cfg.data["signal"]["dump_traces"] = args.dump_traces
    cfg.seed  # re-validate after overrides


def _plots_enabled(cfg: RunConfig) -> bool:
    return bool(cfg.data["report"]["plots"])


def _dpi(cfg: RunConfig) -> int:
    return int(cfg.data["report"]["dpi"])


def cmd_simulate(cfg: RunConfig, out_dir: str, args) -> tuple[list[str], None]:
    """Run one campaign and write the trial table."""
    campaign = cfg.campaign("simulate")
    trials = run_campaign(campaign)
    write_csv(
        os.path.join(out_dir, "trials.csv"),
        ["trial_index", "v0_mps", "omega0_radps", "delta_z_m"],
        (
            (i, trials.v0[i], trials.omega0[i], trials.delta_z[i])
            for i in range(len(trials))
        ),
    )
    files = ["trials.csv"]
    if _plots_enabled(cfg):
        try:
            hist = analysis.build_histogram(trials.delta_z)
            fit = analysis.fit_gaussian(trials.delta_z) if len(trials) >= 10 else None
        except DataError:
            hist = None
            fit = None
        if hist is not None:
            name = "fig_displacement_hist.png"
            report.save_sample_hist(
                os.path.join(out_dir, name),
                hist,
                fit,
                xlabel="displacement (nm)",
                scale=1e9,
                dpi=_dpi(cfg),
            )
            files.append(name)
    return files, None


def _read_velocities(path: str, t_tof: float) -> np.ndarray:
    """Load velocities from a trial table or a velocity CSV.

    Malformed rows are reported with their file line number.
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read input file: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty input file")
        cols = [h.strip() for h in header]
        if "delta_z_m" in cols:
            idx = cols.index("delta_z_m")
            factor = 1.0 / t_tof
        elif "velocity_mps" in cols:
            idx = cols.index("velocity_mps")
            factor = 1.0
        else:
            raise DataError(
                f"{path}: line 1: need a 'delta_z_m' or 'velocity_mps' column, "
                f"got {cols}"
            )
        values: list[float] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                value = float(row[idx])
            except (IndexError, ValueError):
                raise DataError(f"{path}: line {lineno}: malformed row {row!r}") from None
            if not math.isfinite(value):
                raise DataError(f"{path}: line {lineno}: non-finite value")
            values.append(value)
    return np.asarray(values) * factor


def cmd_analyze(cfg: RunConfig, out_dir: str, args) -> tuple[list[str], None]:
    """Fit one sample file and write the summary and histogram."""
    input_path = getattr(args, "input", None) or cfg.data["analyze"]["input"]
    if not input_path:
        raise ConfigError("analyze.input: no input file given (use --input PATH)")
    protocol = cfg.protocol()
    particle = cfg.particle()
    trap = cfg.trap()
    velocities = _read_velocities(str(input_path), protocol.t_tof)
    fit = analysis.fit_gaussian(velocities)
    moments = analysis.compute_moments(velocities)
    hist = analysis.build_histogram(
        velocities,
        n_bins=cfg.data["analyze"]["n_bins"],
        bin_width=cfg.data["analyze"]["bin_width"],
    )
    try:
        n_z = occupation_from_width(fit.width_dv, particle, trap)
        n_z_err = particle.mass * fit.width_dv * fit.width_err / (
            CONSTANTS.hbar * trap.omega_z
        )
        sub_quantum = False
    except SubQuantumWidthError:
        n_z = None
        n_z_err = None
        sub_quantum = True
    summary = {
        "input": str(input_path),
        "n_samples": fit.n_samples,
        "center_mps": fit.center,
        "center_err_mps": fit.center_err,
        "width_dv_mps": fit.width_dv,
        "width_err_mps": fit.width_err,
        "width_convention": "dv = sqrt(2) * gaussian sigma",
        "reduced_chi2": fit.goodness,
        "n_z_inferred": n_z,
        "n_z_inferred_err": n_z_err,
        "sub_quantum_width": sub_quantum,
        "moments": {
            "mean_mps": moments.mean,
            "std_mps": moments.std,
            "skewness": moments.skewness,
            "skewness_se": moments.se_skewness,
            "excess_kurtosis": moments.excess_kurtosis,
            "kurtosis_se": moments.se_kurtosis,
        },
        "skew_negative": moments.skewness < -3.0 * moments.se_skewness,
        "heavy_tails": moments.excess_kurtosis > 3.0 * moments.se_kurtosis,
    }
    write_json(os.path.join(out_dir, "summary.json"), summary)
    write_csv(
        os.path.join(out_dir, "histogram.csv"),
        ["bin_left_mps", "bin_right_mps", "count"],
        (
            (hist.bin_edges[i], hist.bin_edges[i + 1], int(hist.counts[i]))
            for i in range(hist.counts.size)
        ),
    )
    files = ["summary.json", "histogram.csv"]
    if _plots_enabled(cfg):
        name = "fig_velocity_hist.png"
        report.save_sample_hist(
            os.path.join(out_dir, name),
            hist,
            fit,
            xlabel="velocity (um/s)",
            scale=1e6,
            dpi=_dpi(cfg),
        )
        files.append(name)
    return files, None


def cmd_sweep(cfg: RunConfig, out_dir: str, args) -> tuple[list[str], None]:
    """Per-occupation campaigns, width fits, and the broadening fit."""
    sweep = cfg.data["sweep"]
    n_z_values = [float(v) for v in sweep["n_z_values"]]
    if len(set(n_z_values)) < 2:
        raise ConfigError("sweep.n_z_values: need at least 2 distinct occupations")
    particle = cfg.particle()
    trap = cfg.trap()
    protocol = cfg.protocol()
    systematic = float(sweep["systematic_width_fraction"])
    points: list[analysis.WidthCurvePoint] = []
    failed: list[dict] = []
    for i, n_z in enumerate(n_z_values):
        try:
            campaign = cfg.campaign("sweep", n_z=n_z, stream=i)
            trials = run_campaign(campaign)
            velocities = analysis.displacement_to_velocity(trials.delta_z, protocol)
            fit = analysis.fit_gaussian(velocities)
            stat_err = analysis.bootstrap_width_error(
                velocities, n_resamples=int(sweep["bootstrap_resamples"]), seed=cfg.seed
            )
            total_err = math.hypot(stat_err, systematic * fit.width_dv)
            points.append(
                analysis.WidthCurvePoint(n_z=n_z, width=fit.width_dv, width_err=total_err)
            )
        except LevitofError as exc:  # record and keep sweeping
            failed.append({"n_z": n_z, "error": str(exc)})
    if len(points) < 2:
        raise NumericsError("occupation sweep produced fewer than 2 usable points")
    fit_result = analysis.fit_width_curve(points, particle, trap)
    delta_omega = cfg.libration().delta_omega
    if delta_omega > 0:
        epsilon2 = fit_result.eps2_delta_omega / delta_omega
        epsilon2_err = fit_result.error / delta_omega
    else:
        epsilon2 = None
        epsilon2_err = None
    write_csv(
        os.path.join(out_dir, "width_curve.csv"),
        ["n_z", "width_mps", "width_err_mps"],
        ((p.n_z, p.width, p.width_err) for p in points),
    )
    write_json(
        os.path.join(out_dir, "width_fit.json"),
        {
            "n_points": fit_result.n_points,
            "eps2_delta_omega_mps": fit_result.eps2_delta_omega,
            "eps2_delta_omega_err_mps": fit_result.error,
            "q_mps2": fit_result.q,
            "q_err_mps2": fit_result.q_error,
            "reduced_chi2": fit_result.reduced_chi2,
            "delta_omega_radps": delta_omega,
            "epsilon2_m": epsilon2,
            "epsilon2_err_m": epsilon2_err,
            "systematic_width_fraction": systematic,
            "failed_points": failed,
        },
    )
    files = ["width_curve.csv", "width_fit.json"]
    if _plots_enabled(cfg):
        name = "fig_width_curve.png"
        report.save_width_curve(
            os.path.join(out_dir, name), points, fit_result, particle, trap, dpi=_dpi(cfg)
        )
        files.append(name)
    return files, None


def cmd_libration_center(
    cfg: RunConfig, out_dir: str, args
) -> tuple[list[str], NumericsError | None]:
    """Asymmetry sweep of the libration-center offset, three methods."""
    section = cfg.data["libration_center"]
    trap = cfg.trap()
    base = cfg.geometry()
    rows = sweep_asymmetry(base, trap, [float(r) for r in section["ca_ratios"]])
    write_csv(
        os.path.join(out_dir, "libration_center.csv"),
        [
            "c_over_a",
            "eps2_approx_m",
            "eps2_exact_m",
            "eps2_numeric_m",
            "residual_exact",
            "residual_numeric",
            "spread",
            "status",
        ],
        (
            (
                r.c_over_a,
                r.eps2_approx,
                r.eps2_exact,
                r.eps2_numeric,
                r.residual_exact,
                r.residual_numeric,
                r.spread,
                "ok" if r.error is None else f"error: {r.error}",
            )
            for r in rows
        ),
    )
    files = ["libration_center.csv"]
    ok_rows = [r for r in rows if r.error is None]
    if _plots_enabled(cfg) and ok_rows:
        name = "fig_libration_center.png"
        report.save_libration_sweep(os.path.join(out_dir, name), rows, dpi=_dpi(cfg))
        files.append(name)
    deferred: NumericsError | None = None
    threshold = float(section["spread_threshold"])
    worst = max((r.spread for r in ok_rows), default=0.0)
    n_failed = len(rows) - len(ok_rows)
    if worst > threshold:
        deferred = NumericsError(
            f"cross-method spread {worst:.3g} exceeds threshold {threshold:.3g}"
        )
    elif n_failed:
        deferred = NumericsError(f"{n_failed} sweep row(s) failed; see libration_center.csv")
    return files, deferred


def cmd_signal(cfg: RunConfig, out_dir: str, args) -> tuple[list[str], None]:
    """Synthesize, filter, and demodulate one trace per trial."""
    section = cfg.data["signal"]
    trap = cfg.trap()
    particle = cfg.particle()
    protocol = cfg.protocol()
    campaign = cfg.campaign("signal", model_section="simulate")
    trials = run_campaign(campaign)
    filter_spec = cfg.filter_spec()
    window = (float(section["window"][0]), float(section["window"][1]))
    duration = float(section["duration_s"])
    rate = float(section["sample_rate_hz"])
    noise_rms = float(section["noise_rms_m"])
    dump = int(section["dump_traces"])
    n = len(trials)
    recovered = np.empty(n)
    rows = []
    files: list[str] = []
    example = None
    low_count = 0
    for i in range(n):
        rng = counter_rng(cfg.seed, _NOISE_BASE + i)
        ts = synthesize_recapture(
            float(trials.delta_z[i]),
            float(trials.v0[i]),
            trap,
            duration,
            rate,
            noise_rms=noise_rms,
            rng=rng,
        )
        filtered = bandpass(ts, filter_spec)
        if example is None:
            example = filtered
        if i < dump:
            trace_name = f"trace_{i:04d}.csv"
            write_trace(os.path.join(out_dir, trace_name), ts)
            files.append(trace_name)
        result = extract_amplitude(filtered, trap, window=window)
        recovered[i] = result.amplitude
        low_count += int(result.low_confidence)
        rows.append(
            (i, trials.delta_z[i], result.amplitude, result.snr, result.low_confidence)
        )
    write_csv(
        os.path.join(out_dir, "signal_recovery.csv"),
        ["trial_index", "delta_z_true_m", "delta_z_recovered_m", "snr", "low_confidence"],
        rows,
    )
    files.insert(0, "signal_recovery.csv")
    calibration = calibrate_equipartition(
        measured_variance=1.0,
        temperature=float(section["calibration_temperature_k"]),
        particle=particle,
        trap=trap,
    )
    summary = {
        "n_trials": n,
        "n_low_confidence": low_count,
        "noise_rms_m": noise_rms,
        "filter": {
            "highpass_hz": filter_spec.highpass_cutoff,
            "lowpass_hz": filter_spec.lowpass_cutoff,
            "order": filter_spec.order,
            "gain_reference_hz": filter_spec.gain_reference_hz,
            "zero_phase_gain_x": zero_phase_gain(
                filter_spec, rate, trap.omega_x / (2 * math.pi)
            ),
            "zero_phase_gain_y": zero_phase_gain(
                filter_spec, rate, trap.omega_y / (2 * math.pi)
            ),
            "zero_phase_gain_z": zero_phase_gain(
                filter_spec, rate, trap.omega_z / (2 * math.pi)
            ),
        },
        "calibration": {
            "temperature_k": float(section["calibration_temperature_k"]),
            "q0_m": calibration.q0,
        },
    }
    if n >= 10:
        true_fit = analysis.fit_gaussian(trials.delta_z / protocol.t_tof)
        rec_fit = analysis.fit_gaussian(recovered / protocol.t_tof)
        summary["width_true_dv_mps"] = true_fit.width_dv
        summary["width_recovered_dv_mps"] = rec_fit.width_dv
        summary["width_relative_deviation"] = (
            rec_fit.width_dv / true_fit.width_dv - 1.0
        )
    write_json(os.path.join(out_dir, "signal_summary.json"), summary)
    files.append("signal_summary.json")
    if _plots_enabled(cfg):
        name = "fig_signal_recovery.png"
        report.save_signal_recovery(
            os.path.join(out_dir, name), trials.delta_z, recovered, example, dpi=_dpi(cfg)
        )
        files.append(name)
    return files, None


_COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "sweep": cmd_sweep,
    "libration-center": cmd_libration_center,
    "signal": cmd_signal,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        _apply_overrides(cfg, args)
        out_dir = cfg.output_dir
        os.makedirs(out_dir, exist_ok=True)
        files, deferred = _COMMANDS[args.command](cfg, out_dir, args)
        with open(os.path.join(out_dir, "config.yaml"), "w", encoding="utf-8") as fh:
            fh.write(cfg.source_text)
        with open(
            os.path.join(out_dir, "effective_config.yaml"), "w", encoding="utf-8"
        ) as fh:
            fh.write(cfg.effective_yaml())
        files = files + ["config.yaml", "effective_config.yaml"]
        write_manifest(out_dir, cfg.source_text, __version__, files)
        if deferred is not None:
            print(f"numerical failure: {deferred}", file=sys.stderr)
            return 3
        return 0
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
