import numpy as np
import pytest

from rb422.config import ExperimentConfig
from rb422.experiment import run_experiment, write_results
from rb422.plotting import (CSV_COLUMNS, emit_plot_data, plot_fidelity_comparison, read_plot_data,
                            render_report)


@pytest.fixture(scope="module")
def noiseless():
    return run_experiment(ExperimentConfig(sequences_per_length=2, shots=20, bootstrap_resamples=0))


def test_csv_per_run_type(tmp_path, noiseless):
    paths = emit_plot_data(noiseless, tmp_path)
    assert sorted(p.name for p in paths) == sorted(f"{rt}.csv" for rt in noiseless.records)
    header = (tmp_path / "logical_standard.csv").read_text().splitlines()[0]
    assert tuple(header.split(",")) == CSV_COLUMNS
    for p in paths:
        d = read_plot_data(p)
        # default schedule: 31 lengths, noiseless survival and fit both 1
        assert len(d["m"]) == 31
        assert np.all(d["q_mean"] == 1.0)
        assert np.allclose(d["fitted"], 1.0)
        assert np.all(d["binomial_error"] == 0.0)
    assert np.all(read_plot_data(tmp_path / "physical_standard.csv")["discard"] == 0.0)


def test_report_from_file(tmp_path, noiseless):
    path = write_results(noiseless, tmp_path / "r.jsonl")
    paths = render_report(path, tmp_path / "plots")
    png = tmp_path / "plots" / "survival.png"
    assert png in paths and png.read_bytes()[:4] == b"\x89PNG"


def test_fidelity_comparison_figure(tmp_path):
    p = plot_fidelity_comparison([0, 0.05, 0.1], [0.99, 0.97, 0.96], [0.99, 0.98, 0.95], tmp_path / "f.png")
    assert p.stat().st_size > 0
