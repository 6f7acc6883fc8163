import json

import pytest

from rb422.cli import main


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"lengths": [1, 4, 7], "sequences_per_length": 2, "shots": 50,
                                "bootstrap_resamples": 49, "noise": {"element_depolarizing": 0.03}}))
    return path


def test_verify(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "order 576" in out and "FAIL" not in out


def test_run_fit_bootstrap_plot(tmp_path, config, capsys):
    res = tmp_path / "r.jsonl"
    assert main(["run", "--config", str(config), "--seed", "3", "--out", str(res)]) == 0
    assert res.exists()
    assert "logical_422\tpostselected" in capsys.readouterr().out
    assert main(["fit", str(res)]) == 0
    assert main(["bootstrap", str(res), "--resamples", "29", "--out", str(tmp_path / "b.jsonl")]) == 0
    assert (tmp_path / "b.jsonl").exists()
    assert main(["plot-data", str(res), "--out", str(tmp_path / "p"), "--no-figures"]) == 0
    assert (tmp_path / "p" / "logical_phased.csv").exists()
    assert not (tmp_path / "p" / "survival.png").exists()


def test_flags_override_config(tmp_path, config):
    res = tmp_path / "r.jsonl"
    assert main(["run", "--config", str(config), "--shots", "7", "--resamples", "0", "--out", str(res)]) == 0
    rec = next(json.loads(ln) for ln in res.read_text().splitlines() if '"record"' in ln)
    assert rec["total_shots"] == 7


def test_export_simulate_ingest(tmp_path, config, capsys):
    q = tmp_path / "qasm"
    assert main(["export-qasm", "--config", str(config), "--out", str(q), "--simulate"]) == 0
    assert (q / "manifest.json").exists()
    out = tmp_path / "ingested.jsonl"
    assert main(["ingest", str(q), "--config", str(config), "--out", str(out)]) == 0
    assert out.exists()
    direct = tmp_path / "direct.jsonl"
    assert main(["run", "--config", str(config), "--out", str(direct)]) == 0
    assert out.read_bytes() == direct.read_bytes()


def test_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"unknown": 1}))
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["fit", str(tmp_path / "missing.jsonl")]) == 2
