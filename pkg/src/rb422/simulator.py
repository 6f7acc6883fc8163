"""Dense density-matrix simulation of small noisy circuits.

Each circuit is cut into layers (see :func:`rb422.circuit.layers`). After the
gates of a layer the model's gate-class channels act on the touched qubits,
the idle channel on the untouched ones, and every configured ZZ crosstalk
rotation fires once. A barrier applies the per-element channel.

For up to four qubits each distinct layer is compiled once into a 256 x 256
superoperator; larger registers apply Kraus operators directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np

from .channels import NoiseChannel, NotCPTPError, pauli_basis, zz_unitary
from .circuit import BARRIER, Barrier, Circuit, Gate, layers
from .clifford import embed, gate_unitary

SUPEROP_MAX_QUBITS = 4


@dataclass(frozen=True)
class MeasurementNoise:
    """Classical readout flips: ``p01`` is P(read 1 | 0), ``p10`` is P(read 0 | 1).

    Scalars apply to every qubit; tuples give per-qubit values.
    """

    p01: Union[float, tuple[float, ...]] = 0.0
    p10: Union[float, tuple[float, ...]] = 0.0

    def __post_init__(self):
        for v in np.atleast_1d(self.p01).tolist() + np.atleast_1d(self.p10).tolist():
            if not 0 <= v <= 1:
                raise ValueError("flip probabilities must lie in [0, 1]")

    def confusion(self, qubit: int) -> np.ndarray:
        p01 = self.p01[qubit] if isinstance(self.p01, tuple) else self.p01
        p10 = self.p10[qubit] if isinstance(self.p10, tuple) else self.p10
        # column = true bit, row = reported bit
        return np.array([[1 - p01, p10], [p01, 1 - p10]])

    @property
    def trivial(self) -> bool:
        return not np.any(np.atleast_1d(self.p01)) and not np.any(np.atleast_1d(self.p10))


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Noise attached to gate classes plus ZZ crosstalk.

    ``element`` acts on the first ``element.n`` qubits at every barrier.
    ``crosstalk`` is a tuple of ``((a, b), theta)`` pairs.
    """

    single_qubit_gate: Optional[NoiseChannel] = None
    two_qubit_gate: Optional[NoiseChannel] = None
    idle: Optional[NoiseChannel] = None
    state_prep: Optional[NoiseChannel] = None
    element: Optional[NoiseChannel] = None
    measurement: MeasurementNoise = field(default_factory=MeasurementNoise)
    crosstalk: tuple[tuple[tuple[int, int], float], ...] = ()

    def __post_init__(self):
        for name, arity in (("single_qubit_gate", 1), ("two_qubit_gate", 2), ("idle", 1), ("state_prep", 1)):
            ch = getattr(self, name)
            if ch is None:
                continue
            if ch.n != arity:
                raise ValueError(f"{name} channel must act on {arity} qubit(s)")
            if not ch.is_cptp():
                raise NotCPTPError(f"{name} channel is not CPTP")
        if self.element is not None and not self.element.is_cptp():
            raise NotCPTPError("element channel is not CPTP")
        for pair, theta in self.crosstalk:
            if len(pair) != 2 or pair[0] == pair[1] or not np.isfinite(theta):
                raise ValueError(f"bad crosstalk entry {(pair, theta)}")

    @property
    def noiseless(self) -> bool:
        return (all(getattr(self, k) is None for k in
                    ("single_qubit_gate", "two_qubit_gate", "idle", "state_prep", "element"))
                and self.measurement.trivial and all(t == 0 for _, t in self.crosstalk))


NOISELESS = NoiseModel()


# --- density matrix helpers -------------------------------------------------

def zero_state(n: int) -> np.ndarray:
    rho = np.zeros((1 << n, 1 << n), dtype=complex)
    rho[0, 0] = 1
    return rho


def check_density_matrix(rho: np.ndarray, atol: float = 1e-10) -> None:
    if not np.allclose(rho, rho.conj().T, atol=atol):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > atol:
        raise ValueError("density matrix does not have unit trace")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -1e-9:
        raise ValueError("density matrix is not positive")


class Simulator:
    """Executes circuits on ``n`` qubits under one noise model."""

    def __init__(self, model: NoiseModel, n: int):
        self.model = model
        self.n = n
        for pair, _ in model.crosstalk:
            if max(pair) >= n:
                raise IndexError(f"crosstalk pair {pair} outside {n}-qubit register")
        if model.element is not None and model.element.n > n:
            raise ValueError("element channel larger than the register")
        self._cache: dict = {}
        self._xt = None
        if model.crosstalk:
            u = np.eye(1 << n, dtype=complex)
            for pair, theta in model.crosstalk:
                if theta:
                    u = embed(zz_unitary(theta), list(pair), n) @ u
            self._xt = u

    # Each step is ("u", unitary), ("s", superop) or ("k", [kraus...]) on the full register.
    def _layer_steps(self, layer: tuple[Gate, ...]) -> list:
        n, m = self.n, self.model
        u = np.eye(1 << n, dtype=complex)
        touched: set[int] = set()
        for g in layer:
            u = gate_unitary(g.name, g.qubits, n) @ u
            touched.update(g.qubits)
        steps: list = [("u", u)]
        for g in layer:
            ch = m.single_qubit_gate if len(g.qubits) == 1 else m.two_qubit_gate
            if ch is not None:
                steps.append(("k", ch.embedded(g.qubits, n)))
        if m.idle is not None:
            for q in range(n):
                if q not in touched:
                    steps.append(("k", m.idle.embedded([q], n)))
        if self._xt is not None:
            steps.append(("u", self._xt))
        return steps

    def _element_steps(self) -> list:
        ch = self.model.element
        if ch is None:
            return []
        if ch.n == self.n:
            return [("s", ch.superop)]
        return [("k", ch.embedded(list(range(ch.n)), self.n))]

    def _prep_steps(self) -> list:
        ch = self.model.state_prep
        if ch is None:
            return []
        return [("k", ch.embedded([q], self.n)) for q in range(self.n)]

    def _compiled(self, key, builder):
        hit = self._cache.get(key)
        if hit is None:
            steps = builder()
            if self.n <= SUPEROP_MAX_QUBITS:
                d2 = 1 << (2 * self.n)
                s = np.eye(d2, dtype=complex)
                for kind, payload in steps:
                    if kind == "u":
                        s = np.kron(payload, payload.conj()) @ s
                    elif kind == "s":
                        s = payload @ s
                    else:
                        s = sum(np.kron(k, k.conj()) for k in payload) @ s
                to_pauli, from_pauli = _pauli_change(self.n)
                hit = ("r", np.ascontiguousarray(np.real(to_pauli @ s @ from_pauli)))
            else:
                hit = ("steps", steps)
            self._cache[key] = hit
        return hit

    def _apply(self, state, compiled):
        kind, payload = compiled
        if kind == "r":
            return payload @ state
        for step, op in payload:
            if step == "u":
                state = op @ state @ op.conj().T
            elif step == "s":
                d = state.shape[0]
                state = (op @ state.reshape(-1)).reshape(d, d)
            else:
                state = sum(k @ state @ k.conj().T for k in op)
        return state

    def _to_internal(self, rho: np.ndarray):
        if self.n <= SUPEROP_MAX_QUBITS:
            return np.real(_pauli_change(self.n)[0] @ rho.reshape(-1))
        return rho

    def _from_internal(self, state) -> np.ndarray:
        if self.n <= SUPEROP_MAX_QUBITS:
            d = 1 << self.n
            return (_pauli_change(self.n)[1] @ state).reshape(d, d)
        return state

    def _layer(self, layer: tuple[Gate, ...]):
        for g in layer:
            if max(g.qubits) >= self.n:
                raise IndexError(f"gate {g} outside {self.n}-qubit register")
        return self._layer_steps(layer)

    def prepare(self) -> np.ndarray:
        rho = zero_state(self.n)
        if self.model.state_prep is not None:
            rho = self._from_internal(self._apply(self._to_internal(rho),
                                                  self._compiled(("prep",), self._prep_steps)))
        return rho

    def run(self, ops: Sequence, rho: Optional[np.ndarray] = None) -> np.ndarray:
        state = self._to_internal(self.prepare() if rho is None else rho)
        cache = self._cache
        for item in layers(ops):
            if item is BARRIER or isinstance(item, Barrier):
                if self.model.element is not None:
                    state = self._apply(state, self._compiled(("element",), self._element_steps))
                continue
            hit = cache.get(item)
            if hit is None:
                hit = self._compiled(item, lambda item=item: self._layer(item))
            state = self._apply(state, hit)
        return self._from_internal(state)


@lru_cache(maxsize=None)
def _pauli_change(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Maps between ``vec(rho)`` and the coefficients ``Tr[P_i rho]``."""
    basis = pauli_basis(n)
    d = 1 << n
    to_pauli = np.array([p.T.reshape(-1) for p in basis])
    from_pauli = np.array([p.reshape(-1) for p in basis]).T / d
    return to_pauli, from_pauli


def apply_circuit(rho: np.ndarray, circuit: Union[Circuit, Sequence], model: NoiseModel = NOISELESS,
                  n: Optional[int] = None) -> np.ndarray:
    """Evolve ``rho`` through ``circuit`` (gates and barriers) under ``model``."""
    if isinstance(circuit, Circuit):
        circuit.validate()
        ops, n = circuit.ops, circuit.n
    else:
        ops = list(circuit)
        n = n if n is not None else int(np.log2(rho.shape[0]))
    if rho.shape != (1 << n, 1 << n):
        raise ValueError("state does not match register size")
    return Simulator(model, n).run(ops, rho)


# --- measurement ------------------------------------------------------------

def outcome_probabilities(rho: np.ndarray, qubits: Optional[Sequence[int]] = None,
                          noise: Optional[MeasurementNoise] = None) -> np.ndarray:
    """Distribution over bit strings of ``qubits`` (first listed = most significant)."""
    n = int(np.log2(rho.shape[0]))
    qubits = list(range(n)) if qubits is None else list(qubits)
    p = np.clip(np.real(np.diag(rho)), 0, None).reshape([2] * n)
    rest = tuple(q for q in range(n) if q not in qubits)
    p = p.transpose(qubits + list(rest)).reshape([2] * len(qubits) + [-1]).sum(axis=-1)
    if noise is not None and not noise.trivial:
        for axis, q in enumerate(qubits):
            p = np.moveaxis(np.tensordot(noise.confusion(q), p, axes=([1], [axis])), 0, axis)
    p = p.reshape(-1)
    return p / p.sum()


def sample_counts(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    if shots < 1:
        raise ValueError("shots must be at least 1")
    return rng.multinomial(shots, probs)


def counts_to_histogram(counts: np.ndarray, k: int) -> dict[str, int]:
    return {format(i, f"0{k}b"): int(c) for i, c in enumerate(counts) if c}


def measure_all(rho: np.ndarray, shots: int, seed=None, noise: Optional[MeasurementNoise] = None,
                qubits: Optional[Sequence[int]] = None) -> dict[str, int]:
    """Sample computational-basis outcomes; deterministic for a given seed."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    probs = outcome_probabilities(rho, qubits, noise)
    k = int(np.log2(len(probs)))
    return counts_to_histogram(sample_counts(probs, shots, rng), k)
