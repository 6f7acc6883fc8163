"""Experiment configuration files.

A config is a JSON object. Every key is optional; unknown keys are errors.

.. code-block:: json

    {
      "run_types": ["logical_standard", "logical_phased", "physical_standard", "physical_phased"],
      "lengths": {"start": 2, "step": 3, "stop": 92},
      "sequences_per_length": 36,
      "shots": 1024,
      "prep_mode": "plain",
      "seed": 0,
      "bootstrap_resamples": 9999,
      "bit_order": "circuit",
      "noise": {"single_qubit_depolarizing": 0.004, "two_qubit_depolarizing": 0.03},
      "output": {"results": "results.jsonl", "plot_dir": "plots", "qasm_dir": "qasm"}
    }

``lengths`` may also be an explicit list. Noise keys are listed in
:data:`NOISE_KEYS`; ``zz_pairs`` is either ``"neighbours"`` (adjacent data
qubits on the device) or an explicit list of qubit pairs, and applies to
both platforms unless given per platform as ``{"logical_422": ..., "bare_2q": ...}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from . import code
from .channels import NoiseChannel, bit_flip, depolarizing
from .protocol import RUN_TYPES, RBConfig, default_lengths, platform_of
from .simulator import MeasurementNoise, NoiseModel

NOISE_KEYS = {
    "single_qubit_depolarizing": "depolarizing probability after every single-qubit gate",
    "two_qubit_depolarizing": "two-qubit depolarizing probability after every CNOT",
    "idle_depolarizing": "depolarizing probability on qubits idle in a layer",
    "element_depolarizing": "global depolarizing on the data register at every element boundary",
    "element_qubit_depolarizing": "independent single-qubit depolarizing on each data qubit per element",
    "state_prep_flip": "bit-flip probability on each qubit after reset",
    "measurement_flip": "readout flip probability (number, or {p01, p10})",
    "zz_theta": "ZZ crosstalk angle applied once per layer on each crosstalk pair",
    "zz_pairs": "'neighbours' or a list of qubit pairs",
}
TOP_KEYS = {"run_types", "lengths", "sequences_per_length", "shots", "prep_mode", "seed",
            "bootstrap_resamples", "bit_order", "noise", "output"}
OUTPUT_KEYS = {"results", "plot_dir", "qasm_dir"}
BIT_ORDERS = ("circuit", "device")
NEIGHBOURS = {code.LOGICAL: ((0, 1), (1, 2), (2, 3)), code.BARE: ((0, 1),)}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    run_types: tuple[str, ...] = RUN_TYPES
    lengths: tuple[int, ...] = field(default_factory=default_lengths)
    sequences_per_length: int = 36
    shots: int = 1024
    prep_mode: str = code.PLAIN
    seed: int = 0
    bootstrap_resamples: int = 9999
    bit_order: str = "circuit"
    noise: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.run_types or len(set(self.run_types)) != len(self.run_types):
            raise ConfigError("run_types must be a non-empty list without repeats")
        for rt in self.run_types:
            if rt not in RUN_TYPES:
                raise ConfigError(f"unknown run type {rt!r}")
        if self.bit_order not in BIT_ORDERS:
            raise ConfigError(f"bit_order must be one of {BIT_ORDERS}")
        if self.bootstrap_resamples < 0:
            raise ConfigError("bootstrap_resamples must be non-negative")
        unknown = set(self.noise) - set(NOISE_KEYS)
        if unknown:
            raise ConfigError(f"unknown noise keys {sorted(unknown)}")
        unknown = set(self.output) - OUTPUT_KEYS
        if unknown:
            raise ConfigError(f"unknown output keys {sorted(unknown)}")
        for rt in self.run_types:
            try:
                self.rb_config(rt)
            except ValueError as exc:
                if self.prep_mode == code.FAULT_TOLERANT and platform_of(rt) == code.BARE:
                    continue
                raise ConfigError(str(exc)) from exc
        for platform in {platform_of(rt) for rt in self.run_types}:
            noise_model(self.noise, platform, self.prep_mode)

    def rb_config(self, run_type: str) -> RBConfig:
        prep = self.prep_mode if platform_of(run_type) == code.LOGICAL else code.PLAIN
        return RBConfig(self.lengths, self.sequences_per_length, self.shots, run_type, prep, self.seed)

    def model(self, platform: str) -> NoiseModel:
        return noise_model(self.noise, platform, self.prep_mode)

    def to_dict(self) -> dict:
        return {"run_types": list(self.run_types), "lengths": list(self.lengths),
                "sequences_per_length": self.sequences_per_length, "shots": self.shots,
                "prep_mode": self.prep_mode, "seed": self.seed,
                "bootstrap_resamples": self.bootstrap_resamples, "bit_order": self.bit_order,
                "noise": dict(self.noise), "output": dict(self.output)}

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _parse_lengths(value) -> tuple[int, ...]:
    if isinstance(value, dict):
        extra = set(value) - {"start", "step", "stop"}
        if extra:
            raise ConfigError(f"unknown lengths keys {sorted(extra)}")
        return default_lengths(int(value.get("start", 2)), int(value.get("step", 3)), int(value.get("stop", 92)))
    if isinstance(value, list) and all(isinstance(v, int) for v in value):
        return tuple(value)
    raise ConfigError("lengths must be a list of integers or {start, step, stop}")


def config_from_dict(data: dict[str, Any]) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    kw = dict(data)
    if "lengths" in kw:
        kw["lengths"] = _parse_lengths(kw["lengths"])
    if "run_types" in kw:
        kw["run_types"] = tuple(kw["run_types"])
    for key in ("sequences_per_length", "shots", "seed", "bootstrap_resamples"):
        if key in kw and (not isinstance(kw[key], int) or isinstance(kw[key], bool)):
            raise ConfigError(f"{key} must be an integer")
    for key in ("noise", "output"):
        if key in kw and not isinstance(kw[key], dict):
            raise ConfigError(f"{key} must be an object")
    return ExperimentConfig(**kw)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data)


def _prob(noise: dict, key: str) -> Optional[float]:
    v = noise.get(key)
    if v is None:
        return None
    if not isinstance(v, (int, float)) or not 0 <= v <= 1:
        raise ConfigError(f"{key} must be a probability")
    return float(v)


def _product_channel(ch: NoiseChannel, n: int) -> NoiseChannel:
    ks = [np.ones((1, 1))]
    for _ in range(n):
        ks = [np.kron(a, b) for a in ks for b in ch.kraus]
    return NoiseChannel(ks, name=f"{ch.name}^{n}")


def crosstalk_pairs(noise: dict, platform: str) -> tuple[tuple[int, int], ...]:
    pairs = noise.get("zz_pairs", "neighbours")
    if isinstance(pairs, dict):
        if set(pairs) - {code.LOGICAL, code.BARE}:
            raise ConfigError("per-platform zz_pairs must be keyed by platform")
        pairs = pairs.get(platform, "neighbours")
    if pairs == "neighbours":
        return NEIGHBOURS[platform]
    try:
        out = tuple((int(a), int(b)) for a, b in pairs)
    except (TypeError, ValueError) as exc:
        raise ConfigError("zz_pairs must be 'neighbours' or a list of pairs") from exc
    return out


def noise_model(noise: dict, platform: str, prep_mode: str = code.PLAIN) -> NoiseModel:
    """Build the simulator noise model of ``platform`` from a config ``noise`` block."""
    n_data = 4 if platform == code.LOGICAL else 2
    kw: dict[str, Any] = {}
    p = _prob(noise, "single_qubit_depolarizing")
    if p:
        kw["single_qubit_gate"] = depolarizing(p, 1)
    p = _prob(noise, "two_qubit_depolarizing")
    if p:
        kw["two_qubit_gate"] = depolarizing(p, 2)
    p = _prob(noise, "idle_depolarizing")
    if p:
        kw["idle"] = depolarizing(p, 1)
    p = _prob(noise, "state_prep_flip")
    if p:
        kw["state_prep"] = bit_flip(p)
    pg = _prob(noise, "element_depolarizing")
    pq = _prob(noise, "element_qubit_depolarizing")
    element = None
    if pq:
        element = _product_channel(depolarizing(pq, 1), n_data)
    if pg:
        glob = depolarizing(pg, n_data)
        element = glob if element is None else glob.compose(element)
    if element is not None:
        kw["element"] = element
    mf = noise.get("measurement_flip")
    if mf is not None:
        if isinstance(mf, dict):
            if set(mf) - {"p01", "p10"}:
                raise ConfigError("measurement_flip keys are p01 and p10")
            kw["measurement"] = MeasurementNoise(float(mf.get("p01", 0)), float(mf.get("p10", 0)))
        else:
            kw["measurement"] = MeasurementNoise(float(mf), float(mf))
    theta = noise.get("zz_theta", 0.0)
    if not isinstance(theta, (int, float)) or not np.isfinite(theta):
        raise ConfigError("zz_theta must be a finite number")
    if theta:
        pairs = crosstalk_pairs(noise, platform)
        if any(max(pr) >= n_data for pr in pairs):
            raise ConfigError(f"crosstalk pair outside the {n_data} data qubits of {platform}")
        kw["crosstalk"] = tuple((pr, float(theta)) for pr in pairs)
    try:
        return NoiseModel(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# Per-gate depolarizing levels that put the bare-platform infidelity near 5%.
DEFAULT_GATE_NOISE = {"single_qubit_depolarizing": 0.004, "two_qubit_depolarizing": 0.03}
