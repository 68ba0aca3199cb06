"""End-to-end CLI checks: subcommands, manifests, determinism, error paths."""

import json

import numpy as np
import pytest

from fwachan.cli import main
from fwachan.pathloss import BUILTIN_MODELS, power_law_sample
from fwachan.report import read_metrics_csv

SCENE = {
    "link_id": "demo", "street_id": "elm", "scenario": "same_street",
    "distance_m": 47.0, "path_gain_db": -112.0,
    "specular_paths": [{"azimuth_deg": 84.0, "relative_power_db": 0.0}],
    "diffuse_floor_db": -12.0, "k_factor_db": 16.0,
    "turns": 51, "rpm": 300.0, "sample_rate_hz": 740.0,
}


def write_scene(tmp_path, **overrides):
    scene = {**SCENE, **overrides}
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(scene))
    return path


def run(*argv):
    return main([str(a) for a in argv])


# ---------------------------------------------------------------------------
# synth -> metrics -> report pipeline
# ---------------------------------------------------------------------------

def test_synth_metrics_report_pipeline(tmp_path):
    scene = write_scene(tmp_path)
    scans = tmp_path / "scans.csv"
    assert run("synth", "--config", scene, "--seed", 7, "--output", scans) == 0
    assert scans.exists()
    manifest = json.loads((tmp_path / "scans.csv.manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert manifest["seed"] == 7
    assert str(scans) in manifest["outputs"]

    out = tmp_path / "metrics.csv"
    assert run("metrics", "--input", scans, "--output", out) == 0
    rows = read_metrics_csv(out)
    assert len(rows) == 1
    assert rows[0]["path_gain_db"] == pytest.approx(-112.0, abs=0.3)
    assert rows[0]["warnings"] == ""

    report_dir = tmp_path / "report"
    assert run("report", "--input", out, "--output", report_dir) == 0
    assert (report_dir / "summary.csv").exists()
    assert (report_dir / "eff_gain_cdf.csv").exists()
    assert (report_dir / "eff_gain_cdf.png").stat().st_size > 0
    assert (report_dir / "path_gain_vs_distance.png").stat().st_size > 0
    assert (report_dir / "manifest.json").exists()


def test_metrics_flags_short_record(tmp_path):
    scene = write_scene(tmp_path, turns=5)
    scans = tmp_path / "scans.csv"
    assert run("synth", "--config", scene, "--seed", 1, "--output", scans) == 0
    out = tmp_path / "metrics.csv"
    assert run("metrics", "--input", scans, "--output", out) == 0
    rows = read_metrics_csv(out)
    assert "insufficient turns" in rows[0]["warnings"]
    # Temporal stats still computed from the 5 available turns.
    assert np.isfinite(rows[0]["fluct_p90_db"])


def test_synth_json_output(tmp_path):
    scene = write_scene(tmp_path, turns=3)
    scans = tmp_path / "scans.json"
    assert run("synth", "--config", scene, "--seed", 2, "--output", scans) == 0
    payload = json.loads(scans.read_text())
    assert payload["records"][0]["link_id"] == "demo"


def test_metrics_psd_export(tmp_path):
    scene = write_scene(tmp_path, turns=40)
    scans = tmp_path / "scans.csv"
    assert run("synth", "--config", scene, "--seed", 4, "--output", scans) == 0
    out = tmp_path / "metrics.csv"
    psd_dir = tmp_path / "psd"
    assert run("metrics", "--input", scans, "--output", out,
               "--psd-output", psd_dir) == 0
    psd_file = psd_dir / "demo_doppler.csv"
    lines = psd_file.read_text().strip().splitlines()
    assert lines[0] == "freq_hz,psd"
    assert len(lines) > 10
    freqs = [float(line.split(",")[0]) for line in lines[1:]]
    assert freqs[0] == 0.0
    assert freqs[-1] == pytest.approx(2.5, rel=0.05)  # half the ~5 Hz turn rate


def test_synth_and_metrics_idempotent(tmp_path):
    scene = write_scene(tmp_path, turns=6)
    scans = tmp_path / "scans.csv"
    assert run("synth", "--config", scene, "--seed", 9, "--output", scans) == 0
    first = scans.read_bytes()
    assert run("synth", "--config", scene, "--seed", 9, "--output", scans) == 0
    assert scans.read_bytes() == first

    out = tmp_path / "metrics.csv"
    assert run("metrics", "--input", scans, "--output", out) == 0
    first = out.read_bytes()
    assert run("metrics", "--input", scans, "--output", out) == 0
    assert out.read_bytes() == first


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def test_fit_recovers_same_street_slope(tmp_path):
    model = BUILTIN_MODELS["same_street"]
    rng_d = np.concatenate([np.arange(20.0, 56.0), np.arange(140.0, 201.0, 3.0)])
    d = np.tile(rng_d, 16)
    gains = power_law_sample(model, d, seed=42)
    table = tmp_path / "pathgain.csv"
    table.write_text("distance_m,path_gain_db\n" +
                     "\n".join(f"{di:.1f},{gi:.4f}" for di, gi in zip(d, gains)) + "\n")
    out = tmp_path / "model.json"
    assert run("fit", "--input", table, "--model", "refit", "--output", out) == 0
    entry = json.loads(out.read_text())["refit"]
    assert entry["slope"] == pytest.approx(-4.06, abs=0.1)
    assert entry["sigma_db"] == pytest.approx(6.4, abs=0.6)
    assert (tmp_path / "model_residuals.csv").exists()


def test_fit_is_idempotent(tmp_path):
    table = tmp_path / "pathgain.csv"
    d = np.array([20.0, 40.0, 80.0, 160.0])
    table.write_text("distance_m,path_gain_db\n" +
                     "\n".join(f"{di},{-50 - 30 * np.log10(di):.6f}" for di in d) + "\n")
    out = tmp_path / "model.json"
    assert run("fit", "--input", table, "--output", out) == 0
    first = out.read_bytes()
    assert run("fit", "--input", table, "--output", out) == 0
    assert out.read_bytes() == first


# ---------------------------------------------------------------------------
# tworay
# ---------------------------------------------------------------------------

def test_tworay_table(tmp_path):
    out = tmp_path / "tworay.csv"
    assert run("tworay", "--distances", "20:200:1", "--output", out) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "distance_m,two_ray_gain_db,friis_gain_db"
    assert len(lines) == 181
    rows = [line.split(",") for line in lines[1:]]
    excess = [float(t) - float(f) for _, t, f in rows]
    assert 4.0 <= max(excess) <= 8.0
    assert min(excess) <= -15.0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def test_simulate_default_grid_has_60_rows(tmp_path):
    out = tmp_path / "rates.csv"
    assert run("simulate", "--seed", 1, "--links", 200, "--output", out) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "distance_m,gamma_q_db,rate_bps,config_label,mode"
    assert len(lines) == 61  # header + 60 distances
    assert lines[1].endswith("fwa28_same_street,none")


def test_simulate_byte_identical_across_workers(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    args = ["simulate", "--seed", 11, "--links", 300,
            "--distances", "20:100:5"]
    assert run(*args, "--workers", 1, "--output", a) == 0
    assert run(*args, "--workers", 4, "--output", b) == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_mode_and_model_overrides(tmp_path):
    out = tmp_path / "rates.csv"
    assert run("simulate", "--seed", 3, "--links", 200, "--model", "other_street",
               "--mode", "sampled", "--distances", "30:60:10",
               "--output", out) == 0
    body = out.read_text()
    assert ",sampled" in body
    manifest = json.loads((tmp_path / "rates.csv.manifest.json").read_text())
    assert manifest["seed"] == 3


def test_simulate_rejects_unknown_model(tmp_path, capsys):
    out = tmp_path / "rates.csv"
    code = run("simulate", "--seed", 1, "--model", "bogus", "--output", out)
    assert code == 2
    err = capsys.readouterr().err
    assert err.startswith("fwachan: error:")
    assert err.count("\n") == 1
    assert not out.exists()


def test_simulate_report_renders_rate_figure(tmp_path):
    out = tmp_path / "rates.csv"
    assert run("simulate", "--seed", 5, "--links", 200,
               "--distances", "20:200:10", "--output", out) == 0
    report_dir = tmp_path / "report"
    assert run("report", "--input", out, "--output", report_dir) == 0
    assert (report_dir / "rate_vs_distance.png").stat().st_size > 0


# ---------------------------------------------------------------------------
# Error handling contract
# ---------------------------------------------------------------------------

def test_unknown_flag_is_hard_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("simulate", "--seed", 1, "--output", tmp_path / "x.csv", "--bogus-flag")
    assert exc.value.code == 2


def test_missing_input_single_line_error(tmp_path, capsys):
    code = run("metrics", "--input", tmp_path / "missing.csv",
               "--output", tmp_path / "out.csv")
    assert code == 2
    err = capsys.readouterr().err
    assert err.startswith("fwachan: error:")
    assert err.count("\n") == 1
    assert not (tmp_path / "out.csv").exists()


def test_failure_leaves_no_partial_outputs(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("link_id,street_id,scenario,distance_m\n"
                   "L1,s,same_street,50.0\n"
                   "time_s,azimuth_deg,power_dbm,turn_index\n"
                   "0.0,400.0,-80.0,0\n")
    out = tmp_path / "metrics.csv"
    assert run("metrics", "--input", bad, "--output", out) == 2
    capsys.readouterr()
    leftovers = [p for p in tmp_path.iterdir() if p.name.startswith("metrics")]
    assert leftovers == []


def test_help_lists_flags(capsys):
    with pytest.raises(SystemExit) as exc:
        run("simulate", "--help")
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for flag in ("--config", "--seed", "--model", "--mode", "--distances",
                 "--links", "--quantile", "--output", "--workers"):
        assert flag in text


def test_report_rejects_unknown_table(tmp_path, capsys):
    junk = tmp_path / "junk.csv"
    junk.write_text("a,b,c\n1,2,3\n")
    assert run("report", "--input", junk, "--output", tmp_path / "rep") == 2
    assert "unrecognized table" in capsys.readouterr().err
