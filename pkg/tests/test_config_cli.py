"""Config parsing, override precedence, CLI runs, output contracts."""

import json
import math

import numpy as np
import pytest

from levitof import cli
from levitof.config import load_config, parse_config
from levitof.errors import ConfigError

REFERENCE_YAML = """
seed: 777
simulate:
  n_trials: 60
sweep:
  n_z_values: [0.8, 5.0, 40.0]
  n_trials: 400
  bootstrap_resamples: 120
libration_center:
  ca_ratios: [1.0, 1.005]
signal:
  n_trials: 8
report:
  plots: false
"""


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    monkeypatch.delenv("LEVITOF_SEED", raising=False)
    monkeypatch.delenv("LEVITOF_OUT", raising=False)


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(REFERENCE_YAML)
    return str(path)


def _run(*args: str) -> int:
    return cli.main(list(args))


# --- config layer ---

def test_empty_config_uses_defaults(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    cfg = load_config(str(path))
    assert cfg.seed == 12345
    assert cfg.particle().mass == 4.9e-17
    assert cfg.trap().omega_z == pytest.approx(2 * math.pi * 209e3)


def test_partial_override_merges(config_path):
    cfg = load_config(config_path)
    assert cfg.seed == 777
    assert cfg.data["simulate"]["n_trials"] == 60
    # untouched sections keep their defaults
    assert cfg.data["protocol"]["t_tof_s"] == 68e-6


def test_libration_frequency_converted_to_radians(config_path):
    lib = load_config(config_path).libration()
    assert lib.delta_omega == pytest.approx(2 * math.pi * 3.5e3, rel=1e-12)


def test_unknown_key_reports_dotted_path():
    with pytest.raises(ConfigError, match="trap.bogus"):
        parse_config("trap:\n  bogus: 3\n", "inline")


def test_syntax_error_reports_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("trap:\n  - ]broken\n", "inline")


def test_type_errors_rejected():
    with pytest.raises(ConfigError, match="seed"):
        parse_config("seed: fast\n", "inline")
    with pytest.raises(ConfigError, match="n_trials"):
        parse_config("simulate:\n  n_trials: 2.5\n", "inline")
    with pytest.raises(ConfigError, match="n_z_values"):
        parse_config("sweep:\n  n_z_values: 4\n", "inline")


def test_bin_settings_mutually_exclusive():
    with pytest.raises(ConfigError, match="n_bins"):
        parse_config("analyze:\n  n_bins: 10\n  bin_width: 1e-7\n", "inline")


def test_effective_yaml_reparses_identically(config_path):
    cfg = load_config(config_path)
    text = cfg.effective_yaml()
    again = parse_config(text, "effective")
    assert again.data == cfg.data


# --- simulate / analyze ---

def test_simulate_outputs_and_manifest(tmp_path, config_path):
    out = tmp_path / "sim"
    assert _run("simulate", "--config", config_path, "--out", str(out)) == 0
    rows = (out / "trials.csv").read_text().splitlines()
    assert rows[0] == "trial_index,v0_mps,omega0_radps,delta_z_m"
    assert len(rows) == 61
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["toolkit_version"]
    assert set(manifest["files"]) == {
        "trials.csv",
        "config.yaml",
        "effective_config.yaml",
    }
    # checksums actually match file contents
    import hashlib

    for name, digest in manifest["files"].items():
        payload = (out / name).read_bytes()
        assert hashlib.sha256(payload).hexdigest() == digest
    # the verbatim echo is byte-identical to the input config
    assert (out / "config.yaml").read_text() == REFERENCE_YAML


def test_simulate_ground_state_statistics(tmp_path):
    cfg = tmp_path / "gs.yaml"
    cfg.write_text(
        "state:\n  n_z: 0.0\nsimulate:\n  model: pure\n  n_trials: 150\n"
        "report:\n  plots: false\n"
    )
    out = tmp_path / "gs"
    assert _run("simulate", "--config", str(cfg), "--out", str(out)) == 0
    v0 = np.loadtxt(out / "trials.csv", delimiter=",", skiprows=1, usecols=1)
    # ground-state sampling sigma 1.19 um/s; 12% gate is ~2 sigma at N=150
    assert np.std(v0) == pytest.approx(1.1887434029523493e-06, rel=0.12)


def test_analyze_of_simulated_trials(tmp_path, config_path):
    sim = tmp_path / "sim"
    _run("simulate", "--config", config_path, "--out", str(sim))
    out = tmp_path / "an"
    assert (
        _run(
            "analyze",
            "--config",
            config_path,
            "--out",
            str(out),
            "--input",
            str(sim / "trials.csv"),
        )
        == 0
    )
    summary = json.loads((out / "summary.json").read_text())
    for key in (
        "center_mps",
        "width_dv_mps",
        "width_err_mps",
        "reduced_chi2",
        "n_z_inferred",
        "moments",
        "skew_negative",
    ):
        assert key in summary
    assert summary["n_samples"] == 60
    hist_rows = (out / "histogram.csv").read_text().splitlines()
    assert hist_rows[0] == "bin_left_mps,bin_right_mps,count"
    counts = [int(r.split(",")[2]) for r in hist_rows[1:]]
    assert sum(counts) == 60


def test_analyze_velocity_column_input(tmp_path, config_path):
    data = tmp_path / "v.csv"
    rng = np.random.Generator(np.random.Philox(key=np.array([1, 0], dtype=np.uint64)))
    v = 2.5e-6 * rng.standard_normal(200)
    data.write_text("velocity_mps\n" + "\n".join("%.17g" % x for x in v) + "\n")
    out = tmp_path / "an"
    assert _run("analyze", "--config", config_path, "--out", str(out), "--input", str(data)) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["width_dv_mps"] == pytest.approx(2.5e-6 * math.sqrt(2), rel=0.15)


def test_analyze_sub_quantum_width_flagged(tmp_path, config_path):
    data = tmp_path / "v.csv"
    rng = np.random.Generator(np.random.Philox(key=np.array([2, 0], dtype=np.uint64)))
    v = 1e-7 * rng.standard_normal(200)  # far below the quantum limit
    data.write_text("velocity_mps\n" + "\n".join("%.17g" % x for x in v) + "\n")
    out = tmp_path / "an"
    assert _run("analyze", "--config", config_path, "--out", str(out), "--input", str(data)) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["sub_quantum_width"] is True
    assert summary["n_z_inferred"] is None


def test_analyze_reports_malformed_line(tmp_path, config_path, capsys):
    data = tmp_path / "v.csv"
    data.write_text("velocity_mps\n1e-6\nnot-a-number\n")
    out = tmp_path / "an"
    assert _run("analyze", "--config", config_path, "--out", str(out), "--input", str(data)) == 2
    assert "line 3" in capsys.readouterr().err


def test_analyze_requires_input(tmp_path, config_path):
    assert _run("analyze", "--config", config_path, "--out", str(tmp_path / "x")) == 2


# --- sweep ---

def test_sweep_outputs(tmp_path, config_path):
    out = tmp_path / "sw"
    assert _run("sweep", "--config", config_path, "--out", str(out)) == 0
    rows = (out / "width_curve.csv").read_text().splitlines()
    assert rows[0] == "n_z,width_mps,width_err_mps"
    assert len(rows) == 4
    fit = json.loads((out / "width_fit.json").read_text())
    assert fit["n_points"] == 3
    assert fit["failed_points"] == []
    assert fit["eps2_delta_omega_mps"] > 0
    assert fit["epsilon2_m"] == pytest.approx(
        fit["eps2_delta_omega_mps"] / fit["delta_omega_radps"], rel=1e-12
    )


# --- libration-center ---

def test_libration_center_outputs(tmp_path, config_path):
    out = tmp_path / "lc"
    assert _run("libration-center", "--config", config_path, "--out", str(out)) == 0
    rows = (out / "libration_center.csv").read_text().splitlines()
    assert rows[0] == (
        "c_over_a,eps2_approx_m,eps2_exact_m,eps2_numeric_m,"
        "residual_exact,residual_numeric,spread,status"
    )
    assert len(rows) == 3
    assert all(r.endswith("ok") for r in rows[1:])


def test_libration_center_spread_failure_still_writes(tmp_path, capsys):
    cfg = tmp_path / "strict.yaml"
    cfg.write_text(
        "libration_center:\n  spread_threshold: 1.0e-9\nreport:\n  plots: false\n"
    )
    out = tmp_path / "lc"
    assert _run("libration-center", "--config", str(cfg), "--out", str(out)) == 3
    assert (out / "libration_center.csv").exists()
    assert (out / "manifest.json").exists()
    assert "spread" in capsys.readouterr().err


# --- signal ---

def test_signal_outputs(tmp_path, config_path):
    out = tmp_path / "sig"
    assert _run("signal", "--config", config_path, "--out", str(out), "--dump-traces", "2") == 0
    rows = (out / "signal_recovery.csv").read_text().splitlines()
    assert rows[0] == "trial_index,delta_z_true_m,delta_z_recovered_m,snr,low_confidence"
    assert len(rows) == 9
    assert (out / "trace_0000.csv").exists()
    assert (out / "trace_0001.csv").exists()
    assert not (out / "trace_0002.csv").exists()
    summary = json.loads((out / "signal_summary.json").read_text())
    assert summary["n_trials"] == 8
    assert summary["calibration"]["q0_m"] == pytest.approx(9.818461752379823e-09, rel=1e-9)
    assert summary["filter"]["zero_phase_gain_z"] == pytest.approx(0.77957, rel=1e-3)
    # recovery is honest: every true/recovered pair within a few percent
    for row in rows[1:]:
        _, true_m, rec_m, snr, low = row.split(",")
        assert float(rec_m) == pytest.approx(float(true_m), rel=0.05)
        assert low == "false"


# --- overrides and precedence ---

def test_seed_env_override(tmp_path, config_path, monkeypatch):
    monkeypatch.setenv("LEVITOF_SEED", "31")
    out = tmp_path / "a"
    _run("simulate", "--config", config_path, "--out", str(out))
    assert "seed: 31" in (out / "effective_config.yaml").read_text()


def test_seed_flag_beats_env(tmp_path, config_path, monkeypatch):
    monkeypatch.setenv("LEVITOF_SEED", "31")
    out = tmp_path / "b"
    _run("simulate", "--config", config_path, "--out", str(out), "--seed", "99")
    assert "seed: 99" in (out / "effective_config.yaml").read_text()


def test_out_env_override(tmp_path, config_path, monkeypatch):
    target = tmp_path / "from_env"
    monkeypatch.setenv("LEVITOF_OUT", str(target))
    assert _run("simulate", "--config", config_path) == 0
    assert (target / "trials.csv").exists()


def test_bad_env_seed_rejected(tmp_path, config_path, monkeypatch, capsys):
    monkeypatch.setenv("LEVITOF_SEED", "not-an-int")
    assert _run("simulate", "--config", config_path, "--out", str(tmp_path / "x")) == 2
    assert "LEVITOF_SEED" in capsys.readouterr().err


def test_trials_override_targets_active_command(tmp_path, config_path):
    out = tmp_path / "t"
    _run("simulate", "--config", config_path, "--out", str(out), "--trials", "25")
    assert len((out / "trials.csv").read_text().splitlines()) == 26
    out2 = tmp_path / "t2"
    _run("signal", "--config", config_path, "--out", str(out2), "--trials", "6")
    assert len((out2 / "signal_recovery.csv").read_text().splitlines()) == 7


def test_no_plot_skips_figures(tmp_path):
    cfg = tmp_path / "plots.yaml"
    cfg.write_text("simulate:\n  n_trials: 40\nreport:\n  plots: true\n")
    with_fig = tmp_path / "with"
    _run("simulate", "--config", str(cfg), "--out", str(with_fig))
    assert (with_fig / "fig_displacement_hist.png").exists()
    without = tmp_path / "without"
    _run("simulate", "--config", str(cfg), "--out", str(without), "--no-plot")
    assert not (without / "fig_displacement_hist.png").exists()
    manifest = json.loads((without / "manifest.json").read_text())
    assert "fig_displacement_hist.png" not in manifest["files"]


# --- exit codes and determinism ---

def test_invalid_config_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("trap:\n  frequency_z_hz: -3\n")
    assert _run("simulate", "--config", str(cfg), "--out", str(tmp_path / "x")) == 2
    assert "frequency_z_hz" in capsys.readouterr().err


def test_missing_config_exits_2(tmp_path):
    assert _run("simulate", "--config", str(tmp_path / "nope.yaml")) == 2


def test_unwritable_output_exits_4(tmp_path, config_path, capsys):
    blocker = tmp_path / "blocked"
    blocker.write_text("a file, not a directory")
    assert _run("simulate", "--config", config_path, "--out", str(blocker)) == 4
    assert "I/O error" in capsys.readouterr().err


@pytest.mark.parametrize(
    "command", ["simulate", "analyze", "sweep", "libration-center", "signal"]
)
def test_rerun_is_byte_identical(tmp_path, config_path, command):
    out = tmp_path / "det"
    args = [command, "--config", config_path, "--out", str(out)]
    if command == "analyze":
        sim = tmp_path / "sim"
        _run("simulate", "--config", config_path, "--out", str(sim))
        args += ["--input", str(sim / "trials.csv")]
    assert _run(*args) == 0
    first = {
        p.name: p.read_bytes()
        for p in out.iterdir()
        if p.name != "manifest.json"
    }
    manifest_first = json.loads((out / "manifest.json").read_text())
    assert _run(*args) == 0
    for p in sorted(out.iterdir()):
        if p.name == "manifest.json":
            continue
        assert p.read_bytes() == first[p.name], p.name
    manifest_second = json.loads((out / "manifest.json").read_text())
    manifest_first.pop("created_utc")
    manifest_second.pop("created_utc")
    assert manifest_first == manifest_second
