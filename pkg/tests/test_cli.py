"""End-to-end runs of the command line: synth, design, eval, sweep."""

import csv
import itertools
import json
import math
import time

import pytest

from eqdesign.cli import EVAL_HEADER, SWEEP_HEADER, main


def write_json(path, doc):
    path.write_text(json.dumps(doc) + "\n")
    return str(path)


def run(*argv):
    return main([str(a) for a in argv])


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


SMALL_SYNTH = {
    "num_sets": 1, "num_loudspeakers": 1, "source_ir_length": 12,
    "speaker_ir_length": 8, "reinsertion_level_db": None,
}

SMALL_CONFIG = {
    "variant": "R_DELTA_LS", "L_A": 9, "d_H": 4, "lambda": 1e-8, "beta": 1.0,
    "G0_db": 0.0, "d_G": 0, "L_FFT": 64,
}


@pytest.fixture
def small_scene_path(tmp_path):
    spec = write_json(tmp_path / "spec.json", SMALL_SYNTH)
    out = tmp_path / "scene.json"
    assert run("synth", "--config", spec, "--seed", 1, "--out", out) == 0
    return out


# ---------------------------------------------------------------------------
# synth


def test_synth_is_deterministic(tmp_path):
    spec = write_json(tmp_path / "spec.json", SMALL_SYNTH)
    a, b, c = (tmp_path / name for name in ("a.json", "b.json", "c.json"))
    assert run("synth", "--config", spec, "--seed", 3, "--out", a) == 0
    assert run("synth", "--config", spec, "--seed", 3, "--out", b) == 0
    assert run("synth", "--config", spec, "--seed", 4, "--out", c) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_synth_rejects_unknown_field(tmp_path, capsys):
    spec = write_json(tmp_path / "spec.json", {"num_sets": 1, "venting": "large"})
    assert run("synth", "--config", spec, "--out", tmp_path / "x.json") == 2
    assert "unknown field 'venting'" in capsys.readouterr().err


def test_synth_rejects_broken_json(tmp_path, capsys):
    bad = tmp_path / "spec.json"
    bad.write_text("{")
    assert run("synth", "--config", bad, "--out", tmp_path / "x.json") == 2
    assert "invalid JSON" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# design


def test_design_produces_filter_file(tmp_path, small_scene_path):
    config = write_json(tmp_path / "config.json", SMALL_CONFIG)
    out = tmp_path / "filter.json"
    assert run("design", "--scenario", small_scene_path, "--config", config,
               "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["num_loudspeakers"] == 1
    assert doc["filter_length"] == 9
    assert doc["d_H"] == 4
    assert len(doc["coefficients"]) == 1 and len(doc["coefficients"][0]) == 9
    assert doc["config"]["G0_db"] == 0.0 and doc["config"]["d_G"] == 0
    assert len(doc["scenario_fingerprint"]) == 64


def test_design_config_errors(tmp_path, small_scene_path, capsys):
    missing = {k: v for k, v in SMALL_CONFIG.items() if k != "d_G"}
    config = write_json(tmp_path / "m.json", missing)
    assert run("design", "--scenario", small_scene_path, "--config", config,
               "--out", tmp_path / "f.json") == 2
    assert "missing field 'd_G'" in capsys.readouterr().err

    config = write_json(tmp_path / "u.json", {**SMALL_CONFIG, "ripple": 3})
    assert run("design", "--scenario", small_scene_path, "--config", config,
               "--out", tmp_path / "f.json") == 2
    assert "unknown field 'ripple'" in capsys.readouterr().err


def test_design_dead_forward_path_is_numerical_failure(tmp_path, small_scene_path, capsys):
    config = write_json(tmp_path / "config.json", {**SMALL_CONFIG, "G0_db": -1e9})
    assert run("design", "--scenario", small_scene_path, "--config", config,
               "--out", tmp_path / "f.json") == 3
    assert "numerical failure" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# eval


def designed_pair(tmp_path, synth_doc, config_doc, seed=1):
    spec = write_json(tmp_path / "spec.json", synth_doc)
    scene = tmp_path / "scene.json"
    assert run("synth", "--config", spec, "--seed", seed, "--out", scene) == 0
    config = write_json(tmp_path / "config.json", config_doc)
    filt = tmp_path / "filter.json"
    assert run("design", "--scenario", scene, "--config", config, "--out", filt) == 0
    return scene, filt


def test_eval_outputs(tmp_path, small_scene_path):
    config = write_json(tmp_path / "config.json", SMALL_CONFIG)
    filt = tmp_path / "filter.json"
    assert run("design", "--scenario", small_scene_path, "--config", config,
               "--out", filt) == 0
    assert run("eval", "--scenario", small_scene_path, "--filter", filt,
               "--out", tmp_path / "report") == 0

    rows = read_csv(tmp_path / "report.csv")
    assert rows[0] == EVAL_HEADER
    assert len(rows) == 1 + 64  # one data row per grid bin
    assert float(rows[1][0]) == 0.0  # DC bin leads

    summary = json.loads((tmp_path / "report.json").read_text())
    assert set(summary) == {"delta_h_aud_db", "mean_delta_h_aud_db",
                            "scenario_fingerprint"}
    assert len(summary["delta_h_aud_db"]) == 1


def test_eval_full_scale_row_count(tmp_path):
    scene, filt = designed_pair(
        tmp_path,
        {"num_sets": 1, "num_loudspeakers": 2, "reinsertion_level_db": None},
        {"variant": "MFR_DELTA_LS", "L_A": 99, "d_H": 32, "lambda": 0.1,
         "beta": 1.0, "G0_db": 0.0, "d_G": 96},
    )
    assert run("eval", "--scenario", scene, "--filter", filt,
               "--out", tmp_path / "report") == 0
    assert len(read_csv(tmp_path / "report.csv")) == 1 + 1024


def test_eval_zero_filter_reduces_to_leakage(tmp_path, small_scene_path):
    filt = write_json(tmp_path / "zero.json", {
        "num_loudspeakers": 1, "filter_length": 9, "d_H": 0,
        "coefficients": [[0.0] * 9],
        "config": {"variant": "R_DELTA_LS", "L_A": 9, "d_H": 0, "lambda": 1e-8,
                   "beta": 1.0, "L_FFT": 64, "G0_db": 0.0, "d_G": 0},
        "scenario_fingerprint": "",
    })
    assert run("eval", "--scenario", small_scene_path, "--filter", filt,
               "--out", tmp_path / "report") == 0
    for row in read_csv(tmp_path / "report.csv")[1:]:
        assert row[1] == row[3]  # aided magnitude is the leakage magnitude


def test_eval_speaker_count_mismatch(tmp_path, small_scene_path, capsys):
    filt = write_json(tmp_path / "wide.json", {
        "num_loudspeakers": 2, "filter_length": 4, "d_H": 0,
        "coefficients": [[0.0] * 4, [0.0] * 4],
        "config": {"variant": "R_DELTA_LS", "L_A": 4, "d_H": 0, "lambda": 1e-8,
                   "beta": 1.0, "G0_db": 0.0, "d_G": 0},
        "scenario_fingerprint": "",
    })
    assert run("eval", "--scenario", small_scene_path, "--filter", filt,
               "--out", tmp_path / "report") == 2
    assert "drives 2 loudspeakers" in capsys.readouterr().err


def test_eval_rejects_malformed_filter(tmp_path, small_scene_path, capsys):
    filt = write_json(tmp_path / "bad.json", {"coefficients": [[0.0]]})
    assert run("eval", "--scenario", small_scene_path, "--filter", filt,
               "--out", tmp_path / "report") == 2
    assert "filter: missing field" in capsys.readouterr().err


def test_eval_exact_inversion_pipeline(tmp_path):
    scene, filt = designed_pair(
        tmp_path,
        {"num_sets": 1, "num_loudspeakers": 2, "source_ir_length": 12,
         "speaker_ir_length": 8, "phase_family": "co-prime-pair",
         "leakage_attenuation_db": math.inf, "reinsertion_level_db": None,
         "correlation": 1.0},
        {"variant": "R_DELTA_LS", "L_A": 7, "d_H": 0, "lambda": 1e-12,
         "beta": 1.0, "G0_db": 0.0, "d_G": 0},
        seed=3,
    )
    assert run("eval", "--scenario", scene, "--filter", filt,
               "--out", tmp_path / "report") == 0
    summary = json.loads((tmp_path / "report.json").read_text())
    assert summary["mean_delta_h_aud_db"] < 0.01


# ---------------------------------------------------------------------------
# sweep


SWEEP_SYNTH = {
    "num_sets": 3, "num_loudspeakers": 2, "source_ir_length": 12,
    "speaker_ir_length": 8, "reinsertion_level_db": -20.0,
}


@pytest.fixture
def sweep_scene_path(tmp_path):
    spec = write_json(tmp_path / "spec.json", SWEEP_SYNTH)
    out = tmp_path / "scene.json"
    assert run("synth", "--config", spec, "--seed", 2, "--out", out) == 0
    return out


def test_sweep_resubstitution_rows(tmp_path, sweep_scene_path):
    grid = write_json(tmp_path / "grid.json", {
        "variant": "MFR_DELTA_LS", "N": 2, "d_H": 4, "lambda": [1e-4, 0.1],
        "beta": 1.0, "G0_db": 0.0, "d_G": 0, "L_A": 9,
    })
    out = tmp_path / "sweep.csv"
    assert run("sweep", "--scenario", sweep_scene_path, "--grid", grid,
               "--out", out) == 0
    rows = read_csv(out)
    assert rows[0] == SWEEP_HEADER
    assert len(rows) == 3
    for row, lam in zip(rows[1:], (1e-4, 0.1)):
        assert row[0] == "MFR_DELTA_LS"
        assert (int(row[1]), int(row[2]), int(row[3])) == (2, 9, 4)
        assert float(row[4]) == lam
        assert int(row[8]) == -1
        assert float(row[9]) >= 0.0


def test_sweep_cartesian_order(tmp_path, sweep_scene_path):
    variants = ["R_DELTA_LS", "MFR_DELTA_LS"]
    counts = [1, 2]
    delays = [0, 4]
    lambdas = [1e-4, 0.1]
    grid = write_json(tmp_path / "grid.json", {
        "variant": variants, "N": counts, "d_H": delays, "lambda": lambdas,
        "beta": 1.0, "G0_db": 0.0, "d_G": 0, "L_A": 9,
    })
    out = tmp_path / "sweep.csv"
    assert run("sweep", "--scenario", sweep_scene_path, "--grid", grid,
               "--out", out) == 0
    rows = read_csv(out)[1:]
    expected = list(itertools.product(variants, counts, delays, lambdas))
    assert len(rows) == len(expected)
    for row, (variant, n, d_h, lam) in zip(rows, expected):
        assert (row[0], int(row[1]), int(row[3]), float(row[4])) == (variant, n, d_h, lam)


def test_sweep_leave_one_out_folds(tmp_path, sweep_scene_path):
    grid = write_json(tmp_path / "grid.json", {
        "variant": "MFR_DELTA_LS", "N": 2, "d_H": 4, "lambda": [1e-4, 0.1],
        "beta": 1.0, "G0_db": 0.0, "d_G": 0, "L_A": 9,
    })
    out = tmp_path / "loo.csv"
    assert run("sweep", "--scenario", sweep_scene_path, "--grid", grid,
               "--out", out, "--mode", "leave-one-out") == 0
    rows = read_csv(out)[1:]
    assert len(rows) == 2 * 3
    assert [int(r[8]) for r in rows] == [0, 1, 2, 0, 1, 2]


def test_sweep_leave_one_out_needs_multiple_sets(tmp_path, small_scene_path, capsys):
    grid = write_json(tmp_path / "grid.json", {
        "variant": "R_DELTA_LS", "N": 1, "d_H": 0, "lambda": 1e-8,
        "beta": 1.0, "G0_db": 0.0, "d_G": 0, "L_A": 9,
    })
    assert run("sweep", "--scenario", small_scene_path, "--grid", grid,
               "--out", tmp_path / "loo.csv", "--mode", "leave-one-out") == 2
    assert "at least two sets" in capsys.readouterr().err


def test_sweep_grid_validation(tmp_path, sweep_scene_path, capsys):
    grid = write_json(tmp_path / "grid.json", {
        "variant": "R_DELTA_LS", "N": 1, "d_H": 0, "lambda": 1e-8,
        "beta": 1.0, "G0_db": 0.0,
    })
    assert run("sweep", "--scenario", sweep_scene_path, "--grid", grid,
               "--out", tmp_path / "s.csv") == 2
    assert "missing field 'd_G'" in capsys.readouterr().err

    grid = write_json(tmp_path / "grid.json", {
        "variant": "R_DELTA_LS", "N": 1, "d_H": 0, "lambda": [],
        "beta": 1.0, "G0_db": 0.0, "d_G": 0,
    })
    assert run("sweep", "--scenario", sweep_scene_path, "--grid", grid,
               "--out", tmp_path / "s.csv") == 2
    assert "empty value list" in capsys.readouterr().err


def test_sweep_thread_count_is_immaterial(tmp_path, sweep_scene_path, monkeypatch):
    grid = write_json(tmp_path / "grid.json", {
        "variant": ["R_DELTA_LS", "MFR_DELTA_LS"], "N": [1, 2], "d_H": [0, 4],
        "lambda": [1e-4, 0.1], "beta": 1.0, "G0_db": 0.0, "d_G": 0, "L_A": 9,
    })
    serial = tmp_path / "serial.csv"
    threaded = tmp_path / "threaded.csv"
    monkeypatch.delenv("EQDESIGN_THREADS", raising=False)
    assert run("sweep", "--scenario", sweep_scene_path, "--grid", grid,
               "--out", serial) == 0
    monkeypatch.setenv("EQDESIGN_THREADS", "4")
    assert run("sweep", "--scenario", sweep_scene_path, "--grid", grid,
               "--out", threaded) == 0
    assert serial.read_bytes() == threaded.read_bytes()

    monkeypatch.setenv("EQDESIGN_THREADS", "zero")
    assert run("sweep", "--scenario", sweep_scene_path, "--grid", grid,
               "--out", tmp_path / "x.csv") == 2


def test_sweep_operating_point_study_under_a_minute(tmp_path):
    spec = write_json(tmp_path / "spec.json", {"num_sets": 5, "num_loudspeakers": 2})
    scene = tmp_path / "scene.json"
    assert run("synth", "--config", spec, "--seed", 0, "--out", scene) == 0
    grid = write_json(tmp_path / "grid.json", {
        "variant": "MFR_DELTA_LS", "N": 2, "d_H": [0, 1, 32, 64],
        "lambda": [1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0],
        "beta": 1.0, "G0_db": 0.0, "d_G": 96,
    })
    out = tmp_path / "study.csv"
    start = time.perf_counter()
    assert run("sweep", "--scenario", scene, "--grid", grid, "--out", out,
               "--mode", "leave-one-out") == 0
    assert time.perf_counter() - start < 60.0
    rows = read_csv(out)[1:]
    assert len(rows) == 4 * 6 * 5
    # the delayed, regularized operating points must not be degenerate
    scores = [float(r[9]) for r in rows]
    assert all(math.isfinite(s) for s in scores)
