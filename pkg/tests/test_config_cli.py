import json

import numpy as np
import pytest

from oamsim import cli
from oamsim.config import ConfigError, RunConfig, preset_names, resolve, validate
from oamsim.experiments import calibrate


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# -- configuration -------------------------------------------------------------

@pytest.mark.parametrize("name", preset_names())
def test_presets_load(name):
    cfg = RunConfig.preset(name)
    assert cfg.name == name
    assert cfg.front_grid().nx > 0


def test_unknown_keys_rejected():
    doc = resolve({"extends": "methods"})
    doc["optics"]["focal_lenght_m"] = 0.3
    with pytest.raises(ConfigError, match="focal_lenght_m"):
        RunConfig.from_dict(doc)


def test_extends_merges_deeply():
    cfg = RunConfig.from_dict({"extends": "methods", "name": "x", "counts": {"rate_pairs_per_s": 7}})
    base = RunConfig.preset("methods")
    assert cfg.counts.rate_pairs_per_s == 7
    assert cfg.counts.chsh_time_s == base.counts.chsh_time_s


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        RunConfig.preset("nope")


def test_override_validates():
    cfg = RunConfig.preset("methods")
    assert cfg.override(**{"counts.mc_trials": 200}).counts.mc_trials == 200
    with pytest.raises(ConfigError):
        cfg.override(**{"counts.mc_trials": 10})


@pytest.mark.parametrize("name", ["qubit-paper", "qutrit-paper"])
def test_shipped_calibration_recomputes(name):
    cfg = RunConfig.preset(name)
    assert calibrate(cfg) == pytest.approx(cfg.noise.calibrated_white, abs=1e-9)


def test_ideal_qubit_calibration_golden():
    cfg = RunConfig.preset("ideal-bell").override(**{"noise.target_fidelity": 0.97})
    assert calibrate(cfg) == pytest.approx(0.04, abs=1e-10)


# -- command line --------------------------------------------------------------

def test_usage_error_exit_2(capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["witness", "--bogus"])
    assert e.value.code == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    validate(err, "error")


def test_config_error_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"extends": "methods", "name": "bad", "grid": {"front_n": -1}}))
    code, _, err = run(capsys, "witness", "--config", str(bad), "--out", str(tmp_path))
    assert code == 2
    assert json.loads(err.strip().splitlines()[-1])["error"] == "ConfigError"
    code, _, _ = run(capsys, "witness", "--preset", "ideal-bell", "--white", "1.5",
                     "--out", str(tmp_path))
    assert code == 2


def test_domain_error_exit_1(capsys, tmp_path):
    code, _, err = run(capsys, "generate", "--position", "400", "--out", str(tmp_path), "--quiet")
    assert code == 1
    validate(json.loads(err.strip().splitlines()[-1]), "error")


def test_witness_outputs_and_determinism(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        code, out, _ = run(capsys, "witness", "--preset", "ideal-bell", "--white", "0.04",
                           "--seed", "5", "--out", str(d))
        assert code == 0
    for name in ("counts.csv", "witness_report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rep = json.loads((a / "witness_report.json").read_text())
    validate(rep, "witness_report")
    assert rep["certified_dimension"] == 2
    summary = json.loads(out)
    assert summary["certified_dimension"] == 2


def test_witness_full_white_noise(capsys, tmp_path):
    code, _, _ = run(capsys, "witness", "--preset", "ideal-bell", "--white", "1.0",
                     "--out", str(tmp_path), "--quiet")
    assert code == 0
    rep = json.loads((tmp_path / "witness_report.json").read_text())
    assert rep["certified_dimension"] == 1


def test_chsh_outputs(capsys, tmp_path):
    code, _, _ = run(capsys, "chsh", "--preset", "ideal-bell", "--analytic", "--out", str(tmp_path),
                     "--quiet")
    assert code == 0
    doc = json.loads((tmp_path / "chsh.json").read_text())
    validate(doc, "chsh")
    assert doc["S"] == pytest.approx(2 * np.sqrt(2), abs=1e-9)
    code, _, _ = run(capsys, "chsh", "--preset", "ideal-bell", "--out", str(tmp_path), "--quiet")
    doc = json.loads((tmp_path / "chsh.json").read_text())
    assert doc["mode"] == "sampled" and doc["total_counts"] > 0


def test_generate_single(capsys, tmp_path):
    code, out, _ = run(capsys, "generate", "--l", "0", "--out", str(tmp_path))
    assert code == 0
    doc = json.loads((tmp_path / "generate.json").read_text())
    validate(doc, "generate")
    assert doc["points"][0]["dominant_l"] == 0
    for name in ("spectrum.csv", "image_near.pgm", "image_far.pgm"):
        assert (tmp_path / name).stat().st_size > 0
    code, _, _ = run(capsys, "generate", "--position", "0.5", "--out",
                     str(tmp_path), "--quiet")
    doc = json.loads((tmp_path / "generate.json").read_text())
    assert doc["points"][0]["mean_l"] == pytest.approx(0.5, abs=0.05)


def test_selftest_quick(capsys, tmp_path):
    code, out, _ = run(capsys, "selftest", "--quick", "--preset", "ideal-bell", "--out", str(tmp_path))
    assert code == 0
    doc = json.loads((tmp_path / "selftest.json").read_text())
    validate(doc, "selftest")
    assert doc["failed"] == 0
