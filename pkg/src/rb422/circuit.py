"""Minimal circuit container shared by the code, simulator and QASM layers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np

from .clifford import gate_unitary

ONE_QUBIT_GATES = frozenset({"x", "y", "z", "h", "s", "sdg"})
TWO_QUBIT_GATES = frozenset({"cx", "cz", "swap"})


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        arity = 1 if self.name in ONE_QUBIT_GATES else 2 if self.name in TWO_QUBIT_GATES else None
        if arity is None:
            raise ValueError(f"unknown gate {self.name!r}")
        if len(self.qubits) != arity or len(set(self.qubits)) != arity:
            raise ValueError(f"gate {self.name} needs {arity} distinct qubits, got {self.qubits}")


@dataclass(frozen=True)
class Barrier:
    """Boundary between two group elements."""


BARRIER = Barrier()

Op = Union[Gate, Barrier]


@dataclass
class Circuit:
    """Gates on ``n`` qubits followed by measurement of ``measure``.

    ``measure[i]`` is the physical qubit read into classical bit ``i``.
    """

    n: int
    ops: list[Op] = field(default_factory=list)
    measure: tuple[int, ...] = ()

    def append(self, name: str, *qubits: int) -> None:
        self.ops.append(Gate(name, qubits))

    def extend(self, ops: Sequence[Op]) -> None:
        self.ops.extend(ops)

    def barrier(self) -> None:
        self.ops.append(BARRIER)

    def gates(self) -> Iterator[Gate]:
        return (op for op in self.ops if isinstance(op, Gate))

    def gate_count(self) -> int:
        return sum(1 for _ in self.gates())

    def validate(self) -> None:
        for g in self.gates():
            if any(q >= self.n or q < 0 for q in g.qubits):
                raise IndexError(f"gate {g} outside {self.n}-qubit register")
        if any(q >= self.n or q < 0 for q in self.measure):
            raise IndexError("measured qubit outside register")

    def unitary(self) -> np.ndarray:
        u = np.eye(1 << self.n, dtype=complex)
        for g in self.gates():
            u = gate_unitary(g.name, g.qubits, self.n) @ u
        return u


def inverse_ops(ops: Sequence[Gate]) -> list[Gate]:
    """Gate list implementing the inverse of ``ops``."""
    flip = {"s": "sdg", "sdg": "s"}
    return [Gate(flip.get(g.name, g.name), g.qubits) for g in reversed(ops)]


def layers(ops: Sequence[Op]) -> list[Union[tuple[Gate, ...], Barrier]]:
    """Greedily pack consecutive gates on disjoint qubits into layers.

    Barriers always close the current layer and are passed through.
    """
    out: list = []
    current: list[Gate] = []
    used: set[int] = set()
    for op in ops:
        if isinstance(op, Barrier):
            if current:
                out.append(tuple(current))
            current, used = [], set()
            out.append(op)
            continue
        if used.intersection(op.qubits):
            out.append(tuple(current))
            current, used = [], set()
        current.append(op)
        used.update(op.qubits)
    if current:
        out.append(tuple(current))
    return out
