"""Plot data (CSV) and matplotlib figures for results files."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import analysis
from .experiment import ExperimentResult, read_results
from .protocol import RUN_TYPES, is_phased, platform_of

CSV_COLUMNS = ("m", "q_mean", "binomial_error", "fitted", "discard")


def fitted_curve(result: ExperimentResult, run_type: str, m) -> np.ndarray:
    """Post-selected fit evaluated at ``m``; NaN when no fit is stored."""
    m = np.asarray(m, dtype=float)
    fit = result.fit(platform_of(run_type))
    if fit is None or "params" not in fit:
        return np.full(m.shape, np.nan)
    p = fit["params"]
    if not is_phased(run_type):
        return analysis.ASYMPTOTE + p["B"] * p["b"] ** m
    if fit["model"] != "joint":
        return np.full(m.shape, np.nan)
    return analysis.ASYMPTOTE + fit["kappa"] * p["B"] * p["b"] ** m + p["C"] * p["c"] ** m


def plot_rows(result: ExperimentResult, run_type: str) -> list[tuple]:
    s = result.series(run_type)
    fitted = fitted_curve(result, run_type, s.m)
    return [(int(m), float(q), float(e), float(f), float(d))
            for m, q, e, f, d in zip(s.m, s.q, s.binomial_error(), fitted, s.discard)]


def emit_plot_data(results: Union[str, Path, ExperimentResult], out_dir: Union[str, Path]) -> list[Path]:
    """One ``<run_type>.csv`` per run type, with :data:`CSV_COLUMNS`."""
    result = read_results(results) if not isinstance(results, ExperimentResult) else results
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for rt in RUN_TYPES:
        if rt not in result.records:
            continue
        path = out / f"{rt}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for row in plot_rows(result, rt):
                w.writerow([row[0]] + [repr(v) for v in row[1:]])
        paths.append(path)
    return paths


def read_plot_data(path: Union[str, Path]) -> dict[str, np.ndarray]:
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in CSV_COLUMNS}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_survival(result: ExperimentResult, path: Union[str, Path]) -> Path:
    """Survival with fitted decays for each run type, discard fractions as bars."""
    plt = _pyplot()
    run_types = [rt for rt in RUN_TYPES if rt in result.records]
    fig, axes = plt.subplots(1, len(run_types), figsize=(3.6 * len(run_types), 3.2), squeeze=False,
                             sharey=True)
    for ax, rt in zip(axes[0], run_types):
        s = result.series(rt)
        ax.bar(s.m, s.discard, width=2.0, color="0.8", label="discarded")
        ax.errorbar(s.m, s.q, yerr=s.binomial_error(), fmt="o", ms=3, color="C0", label="survival")
        mm = np.linspace(0, s.m.max(), 200)
        fitted = fitted_curve(result, rt, mm)
        if np.all(np.isfinite(fitted)):
            ax.plot(mm, fitted, color="C3", lw=1.2, label="fit")
        ax.axhline(analysis.ASYMPTOTE, color="0.5", lw=0.6, ls=":")
        ax.set_title(rt.replace("_", " "))
        ax.set_xlabel("sequence length m")
        ax.set_ylim(0, 1.02)
    axes[0][0].set_ylabel("probability")
    axes[0][0].legend(fontsize=7, loc="center right")
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_fidelity_comparison(thetas: Sequence[float], logical: Sequence[float], bare: Sequence[float],
                             path: Union[str, Path], logical_err: Optional[Sequence[float]] = None,
                             bare_err: Optional[Sequence[float]] = None) -> Path:
    """Fitted fidelity of both platforms against crosstalk strength."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.errorbar(thetas, logical, yerr=logical_err, fmt="o-", ms=4, label="logical [4,2,2]")
    ax.errorbar(thetas, bare, yerr=bare_err, fmt="s--", ms=4, label="bare qubits")
    ax.set_xlabel(r"ZZ crosstalk angle $\theta$")
    ax.set_ylabel("average fidelity")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_report(results: Union[str, Path, ExperimentResult], out_dir: Union[str, Path]) -> list[Path]:
    """CSV plot data plus ``survival.png`` for a results file."""
    result = read_results(results) if not isinstance(results, ExperimentResult) else results
    paths = emit_plot_data(result, out_dir)
    paths.append(plot_survival(result, Path(out_dir) / "survival.png"))
    return paths

