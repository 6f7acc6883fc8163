"""Real RB over the Realizable Group on the encoded and the bare platform.

A sequence draws ``m`` elements uniformly from R(2), appends the element that
inverts their product, and folds in one of the Paulis II, IX, XI, XX. In a
standard run the Pauli goes right after state preparation; in a phased run
it goes after the closing basis change, just before readout. A shot
succeeds when the decoded bits equal the Pauli's action on ``00``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from . import code
from .circuit import Circuit, Gate
from .clifford import CliffordElement, compose, inverse
from .code import BARE, LOGICAL, PAULI_TARGETS, EncodingMap
from .groups import GroupCatalog, clifford_group, realizable_group
from .simulator import NoiseModel, Simulator, outcome_probabilities, sample_counts

RUN_TYPES = ("logical_standard", "logical_phased", "physical_standard", "physical_phased")
PAULI_LABELS = ("II", "IX", "XI", "XX")


def platform_of(run_type: str) -> str:
    if run_type not in RUN_TYPES:
        raise ValueError(f"unknown run type {run_type!r}")
    return LOGICAL if run_type.startswith("logical") else BARE


def is_phased(run_type: str) -> bool:
    return run_type.endswith("phased")


def default_lengths(start: int = 2, step: int = 3, stop: int = 92) -> tuple[int, ...]:
    return tuple(range(start, stop + 1, step))


@dataclass(frozen=True)
class RBConfig:
    lengths: tuple[int, ...] = field(default_factory=default_lengths)
    sequences_per_length: int = 36
    shots: int = 1024
    run_type: str = "logical_standard"
    prep_mode: str = code.PLAIN
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(int(m) for m in self.lengths))
        if not self.lengths:
            raise ValueError("need at least one sequence length")
        if any(b <= a for a, b in zip(self.lengths, self.lengths[1:])) or self.lengths[0] < 0:
            raise ValueError("lengths must be non-negative and strictly increasing")
        if self.sequences_per_length < 1 or self.shots < 1:
            raise ValueError("counts must be at least 1")
        platform_of(self.run_type)
        if self.prep_mode not in (code.PLAIN, code.FAULT_TOLERANT):
            raise ValueError(f"unknown prep mode {self.prep_mode!r}")
        if self.prep_mode == code.FAULT_TOLERANT and platform_of(self.run_type) != LOGICAL:
            raise ValueError("ancilla preparation only applies to the logical platform")


@dataclass(frozen=True)
class RBSequence:
    run_type: str
    elements: tuple[int, ...]
    inversion: int
    compiled_pauli: int

    @property
    def m(self) -> int:
        return len(self.elements)

    @property
    def target(self) -> tuple[int, int]:
        return PAULI_TARGETS[self.compiled_pauli]


@dataclass(frozen=True)
class SurvivalRecord:
    run_type: str
    m: int
    replicate: int
    compiled_pauli: int
    total_shots: int
    accepted_shots: int
    successes: int
    parity_rejected: int = 0
    ancilla_rejected: int = 0
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.successes <= self.accepted_shots <= self.total_shots:
            raise ValueError("need successes <= accepted <= total")

    def to_dict(self) -> dict:
        return asdict(self)


def sequence_product(elements: Iterable[int], catalog: GroupCatalog) -> CliffordElement:
    total = CliffordElement.identity(catalog.n)
    for g in elements:
        total = compose(catalog.elements[g], total)
    return total


def sample_sequence(m: int, run_type: str, rng: np.random.Generator,
                    catalog: Optional[GroupCatalog] = None) -> RBSequence:
    cat = realizable_group() if catalog is None else catalog
    platform_of(run_type)
    elements = tuple(int(g) for g in rng.integers(0, len(cat), size=m))
    pauli = int(rng.integers(0, 4))
    inv = cat.index[inverse(sequence_product(elements, cat)).key]
    return RBSequence(run_type, elements, inv, pauli)


# --- physical realisation ---------------------------------------------------

@lru_cache(maxsize=None)
def bare_words() -> tuple[tuple[Gate, ...], ...]:
    """Minimal {X, Z, H, P, CNOT12} gate lists for every R(2) element, by id."""
    r2 = realizable_group()
    cr = clifford_group()
    out = []
    for el in r2.elements:
        gates = []
        for gname in cr.word_names(cr.index[el.key]):
            if gname == "cx12":
                gates.append(Gate("cx", (0, 1)))
            else:
                gates.append(Gate(gname[0], (int(gname[1]) - 1,)))
        out.append(tuple(gates))
    return tuple(out)


@dataclass
class RealizedSequence:
    sequence: RBSequence
    circuit: Circuit
    target: tuple[int, int]
    frame: tuple[int, ...]
    ancilla: bool = False


def realize_physical(seq: RBSequence, prep_mode: str = code.PLAIN, virtual: bool = True) -> RealizedSequence:
    """Turn a sequence into a physical circuit with barriers between elements."""
    platform = platform_of(seq.run_type)
    phased = is_phased(seq.run_type)
    elements = seq.elements + (seq.inversion,)
    if platform == LOGICAL:
        cat = realizable_group()
        prep = code.prepare_logical_00(prep_mode)
        circ = Circuit(prep.n_qubits)
        circ.extend(prep.gates)
        emap = EncodingMap(virtual=virtual)
        if phased:
            pre, post = code.phased_frame_circuit(LOGICAL)
            circ.extend(emap.place_gates(pre))
        else:
            circ.extend(emap.pauli(seq.target))
        for i, g in enumerate(elements):
            if i:
                circ.barrier()
            circ.extend(emap.encode_word(cat.words[g]))
        if phased:
            circ.extend(emap.place_gates(post))
            circ.extend(emap.pauli(seq.target))
        circ.measure = tuple(emap.frame) + ((code.ANCILLA,) if prep.mode == code.FAULT_TOLERANT else ())
        return RealizedSequence(seq, circ, seq.target, tuple(emap.frame), prep.mode == code.FAULT_TOLERANT)

    if prep_mode != code.PLAIN:
        raise ValueError("the bare platform has no encoded preparation")
    words = bare_words()
    circ = Circuit(2)
    paulis = [Gate("x", (q,)) for q in (0, 1) if seq.target[q]]
    if phased:
        pre, post = code.phased_frame_circuit(BARE)
        circ.extend(pre)
    else:
        circ.extend(paulis)
    for i, g in enumerate(elements):
        if i:
            circ.barrier()
        circ.extend(words[g])
    if phased:
        circ.extend(post)
        circ.extend(paulis)
    circ.measure = (0, 1)
    return RealizedSequence(seq, circ, seq.target, (0, 1))


# --- outcome classification -------------------------------------------------

@lru_cache(maxsize=None)
def outcome_tables(platform: str, ancilla: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per outcome index: parity-accepted, ancilla-accepted, logical l1, logical l2.

    Outcome bits are in classical order (code positions, then the ancilla).
    """
    if platform == BARE:
        idx = np.arange(4)
        ones = np.ones(4, bool)
        return ones, ones, (idx >> 1) & 1, idx & 1
    k = 5 if ancilla else 4
    idx = np.arange(1 << k)
    bits = [(idx >> (k - 1 - j)) & 1 for j in range(k)]
    parity_ok = (bits[0] ^ bits[1] ^ bits[2] ^ bits[3]) == 0
    anc_ok = bits[4] == 0 if ancilla else np.ones_like(parity_ok)
    return parity_ok, anc_ok, bits[0] ^ bits[1], bits[0] ^ bits[2]


def classify_counts(counts: np.ndarray, platform: str, target: tuple[int, int],
                    ancilla: bool = False) -> tuple[int, int, int, int, int]:
    """(total, accepted, successes, parity_rejected, ancilla_rejected)."""
    parity_ok, anc_ok, l1, l2 = outcome_tables(platform, ancilla)
    counts = np.asarray(counts)
    total = int(counts.sum())
    hit = (l1 == target[0]) & (l2 == target[1])
    parity_rej = int(counts[~parity_ok].sum())
    anc_rej = int(counts[parity_ok & ~anc_ok].sum())
    accepted = int(counts[parity_ok & anc_ok].sum())
    successes = int(counts[parity_ok & anc_ok & hit].sum())
    return total, accepted, successes, parity_rej, anc_rej


def run_sequence(realized: RealizedSequence, model_or_sim, shots: int, seed) -> SurvivalRecord:
    """Simulate, sample ``shots`` outcomes and score them."""
    circ = realized.circuit
    sim = model_or_sim if isinstance(model_or_sim, Simulator) else Simulator(model_or_sim, circ.n)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    rho = sim.run(circ.ops)
    probs = outcome_probabilities(rho, circ.measure, sim.model.measurement)
    counts = sample_counts(probs, shots, rng)
    seq = realized.sequence
    total, acc, succ, prej, arej = classify_counts(counts, platform_of(seq.run_type), realized.target,
                                                   realized.ancilla)
    return SurvivalRecord(seq.run_type, seq.m, 0, seq.compiled_pauli, total, acc, succ, prej, arej,
                          seed if isinstance(seed, (int, np.integer)) else 0)


def sequence_seeds(master_seed: int, run_type: str, m: int, replicate: int) -> tuple[int, int]:
    """Independent (sequence, shot) seeds for one cell, fixed by the master seed."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(RUN_TYPES.index(run_type), m, replicate))
    a, b = ss.generate_state(2, dtype=np.uint64)
    return int(a), int(b)


def run_protocol(config: RBConfig, model: NoiseModel, progress=None) -> list[SurvivalRecord]:
    """All sequences of one run type; order-independent given the master seed."""
    platform = platform_of(config.run_type)
    n = 2 if platform == BARE else (5 if config.prep_mode == code.FAULT_TOLERANT else 4)
    sim = Simulator(model, n)
    records = []
    for m in config.lengths:
        for rep in range(config.sequences_per_length):
            seq_seed, shot_seed = sequence_seeds(config.seed, config.run_type, m, rep)
            seq = sample_sequence(m, config.run_type, np.random.default_rng(seq_seed))
            realized = realize_physical(seq, config.prep_mode)
            rec = run_sequence(realized, sim, config.shots, shot_seed)
            records.append(SurvivalRecord(**{**rec.to_dict(), "replicate": rep}))
        if progress is not None:
            progress(config.run_type, m)
    return records


# --- survival estimates -----------------------------------------------------

@dataclass
class SurvivalSeries:
    m: np.ndarray
    successes: np.ndarray
    accepted: np.ndarray
    total: np.ndarray
    excluded: tuple[int, ...] = ()

    @property
    def q(self) -> np.ndarray:
        return self.successes / self.accepted

    @property
    def discard(self) -> np.ndarray:
        return 1 - self.accepted / self.total

    @property
    def q_raw(self) -> np.ndarray:
        """Success fraction with rejected shots counted as failures."""
        return self.successes / self.total

    def binomial_error(self) -> np.ndarray:
        q = self.q
        return np.sqrt(q * (1 - q) / self.accepted)


def group_by_length(records: Sequence[SurvivalRecord]) -> dict[int, list[SurvivalRecord]]:
    out: dict[int, list[SurvivalRecord]] = {}
    for r in records:
        out.setdefault(r.m, []).append(r)
    return dict(sorted(out.items()))


def estimate_survival(records: Sequence[SurvivalRecord]) -> SurvivalSeries:
    """Pool records per length (ratio of sums); zero-acceptance lengths are dropped."""
    ms, succ, acc, tot, excluded = [], [], [], [], []
    for m, recs in group_by_length(records).items():
        a = sum(r.accepted_shots for r in recs)
        if a == 0:
            excluded.append(m)
            continue
        ms.append(m)
        succ.append(sum(r.successes for r in recs))
        acc.append(a)
        tot.append(sum(r.total_shots for r in recs))
    return SurvivalSeries(np.array(ms), np.array(succ, float), np.array(acc, float), np.array(tot, float),
                          tuple(excluded))
