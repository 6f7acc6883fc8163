"""Experiment runner and the line-structured results file.

The results file is JSON lines. The first line is the versioned header,
then one line each for the config echo, every :class:`SurvivalRecord`, the
pooled survival series, and every fit and fidelity estimate. Keys are sorted
and nothing time-dependent is written, so equal inputs give equal bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import analysis, code
from .config import ExperimentConfig, config_from_dict
from .protocol import (RUN_TYPES, SurvivalRecord, SurvivalSeries, estimate_survival, platform_of,
                       run_protocol)

FORMAT = "rb422-results"
VERSION = 1
PLATFORM_RUNS = {code.LOGICAL: ("logical_standard", "logical_phased"),
                 code.BARE: ("physical_standard", "physical_phased")}


class ResultsFormatError(ValueError):
    pass


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: dict[str, list[SurvivalRecord]]
    fits: list[dict] = field(default_factory=list)
    estimates: list[dict] = field(default_factory=list)

    def series(self, run_type: str) -> SurvivalSeries:
        return estimate_survival(self.records[run_type])

    def estimate(self, platform: str, kind: str = "postselected") -> Optional[dict]:
        for e in self.estimates:
            if e["platform"] == platform and e["analysis"] == kind:
                return e
        return None

    def fit(self, platform: str, kind: str = "postselected") -> Optional[dict]:
        for f in self.fits:
            if f["platform"] == platform and f["analysis"] == kind:
                return f
        return None


def bootstrap_seed(master: int, platform: str, kind: str) -> int:
    key = (list(PLATFORM_RUNS).index(platform), ("postselected", "no_postselection").index(kind))
    return int(np.random.SeedSequence(master, spawn_key=(len(RUN_TYPES),) + key).generate_state(1)[0])


def _fit_entry(platform: str, kind: str, fit) -> dict:
    if isinstance(fit, analysis.JointFit):
        return {"platform": platform, "analysis": kind, "model": "joint", "params": fit.params,
                "stderr": fit.stderr, "kappa": fit.kappa, "wsse": fit.wsse}
    return {"platform": platform, "analysis": kind, "model": fit.model, "params": fit.params,
            "stderr": fit.stderr, "wsse": fit.wsse}


def analyze(records: dict[str, list[SurvivalRecord]], resamples: int, seed: int) -> tuple[list[dict], list[dict]]:
    """Fits and fidelity estimates for every platform with a standard run."""
    fits, estimates = [], []
    for platform, (std_rt, ph_rt) in PLATFORM_RUNS.items():
        if std_rt not in records:
            continue
        std = records[std_rt]
        ph = records.get(ph_rt)
        kinds = ["postselected"] + (["no_postselection"] if platform == code.LOGICAL else [])
        for kind in kinds:
            raw = kind == "no_postselection"
            bseed = bootstrap_seed(seed, platform, kind)
            flags: list[str] = list(analysis.NAIVE_FIT_FLAGS) if raw else []
            try:
                if ph is not None:
                    fit = analysis.fit_standard_phased(estimate_survival(std), estimate_survival(ph),
                                                       platform=platform, raw=raw)
                    b, c = fit.params["b"], fit.params["c"]
                    se = analysis.fidelity_stderr(fit)
                else:
                    fit = analysis.fit_decay(estimate_survival(std), "reduced_b", raw=raw)
                    b = c = fit.params["b"]
                    se = 0.75 * fit.stderr["b"]
                    flags.append("c_assumed_equal_b")
                est = analysis.FidelityEstimate.from_params(b, c, stderr=se)
                if resamples:
                    est.ci_low, est.ci_high = analysis.bootstrap_ci(std, ph, resamples, bseed,
                                                                    platform=platform, raw=raw)
            except analysis.FitError as exc:
                fits.append({"platform": platform, "analysis": kind, "error": str(exc)})
                continue
            fits.append(_fit_entry(platform, kind, fit))
            estimates.append({"platform": platform, "analysis": kind, "flags": flags,
                              "bootstrap_seed": bseed, "resamples": resamples, **est.to_dict()})
    return fits, estimates


def simulate(config: ExperimentConfig, progress: Optional[Callable] = None) -> dict[str, list[SurvivalRecord]]:
    out = {}
    for rt in config.run_types:
        out[rt] = run_protocol(config.rb_config(rt), config.model(platform_of(rt)), progress)
    return out


def run_experiment(config: ExperimentConfig, path: Union[str, Path, None] = None,
                   progress: Optional[Callable] = None) -> ExperimentResult:
    """Simulate every configured run type, fit, bootstrap and (optionally) write the results file."""
    records = simulate(config, progress)
    fits, estimates = analyze(records, config.bootstrap_resamples, config.seed)
    result = ExperimentResult(config, records, fits, estimates)
    path = path if path is not None else config.output.get("results")
    if path is not None:
        write_results(result, path)
    return result


# --- serialisation ----------------------------------------------------------

def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=True)


def results_lines(result: ExperimentResult) -> list[str]:
    lines = [_dump({"format": FORMAT, "version": VERSION}),
             _dump({"kind": "config", "config": result.config.to_dict()})]
    for rt in RUN_TYPES:
        for r in result.records.get(rt, ()):
            lines.append(_dump({"kind": "record", **r.to_dict()}))
    for rt in RUN_TYPES:
        if rt in result.records:
            s = result.series(rt)
            lines.append(_dump({"kind": "series", "run_type": rt, "m": s.m.tolist(),
                                "successes": s.successes.tolist(), "accepted": s.accepted.tolist(),
                                "total": s.total.tolist(), "discard": s.discard.tolist(),
                                "excluded": list(s.excluded)}))
    for f in result.fits:
        lines.append(_dump({"kind": "fit", **f}))
    for e in result.estimates:
        lines.append(_dump({"kind": "fidelity", **e}))
    return lines


def write_results(result: ExperimentResult, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(results_lines(result)) + "\n")
    return path


def read_results(path: Union[str, Path]) -> ExperimentResult:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ResultsFormatError("empty results file")
    header = json.loads(lines[0])
    if header.get("format") != FORMAT:
        raise ResultsFormatError("not a results file")
    if header.get("version") != VERSION:
        raise ResultsFormatError(f"unsupported results version {header.get('version')}")
    config = None
    records: dict[str, list[SurvivalRecord]] = {}
    fits, estimates = [], []
    for ln in lines[1:]:
        if not ln.strip():
            continue
        obj = json.loads(ln)
        kind = obj.pop("kind", None)
        if kind == "config":
            config = config_from_dict(obj["config"])
        elif kind == "record":
            rec = SurvivalRecord(**obj)
            records.setdefault(rec.run_type, []).append(rec)
        elif kind == "fit":
            fits.append(obj)
        elif kind == "fidelity":
            estimates.append(obj)
        elif kind != "series":
            raise ResultsFormatError(f"unknown line kind {kind!r}")
    if config is None:
        raise ResultsFormatError("results file has no config line")
    return ExperimentResult(config, records, fits, estimates)


def refit(result: ExperimentResult, resamples: Optional[int] = None, seed: Optional[int] = None) -> ExperimentResult:
    """Re-run the analysis on stored records (used by the fit/bootstrap commands)."""
    resamples = result.config.bootstrap_resamples if resamples is None else resamples
    seed = result.config.seed if seed is None else seed
    fits, estimates = analyze(result.records, resamples, seed)
    return ExperimentResult(result.config, result.records, fits, estimates)


def records_from_list(records: Sequence[SurvivalRecord]) -> dict[str, list[SurvivalRecord]]:
    out: dict[str, list[SurvivalRecord]] = {}
    for r in records:
        out.setdefault(r.run_type, []).append(r)
    return out
