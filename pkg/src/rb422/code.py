"""The [4,2,2] error-detecting code.

Physical qubits are indexed 0..3 (q1..q4) with q1 the leftmost tensor factor.
The codewords are

    |ab>_L = (|s> + |~s>) / sqrt(2),   s = (a^b, b, a, 0)

so logical X on qubit 1 is X I X I, logical X on qubit 2 is X X I I, logical
Z on qubit 1 is Z Z I I and logical Z on qubit 2 is Z I Z I. Reading out all
four qubits gives logical bits (b1^b2, b1^b3); odd parity flags an error.

Virtual gates (logical CNOTs) are physical qubit swaps that are never
executed. An :class:`EncodingMap` tracks where each code position currently
lives: ``frame[i]`` is the physical qubit holding position ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .circuit import Gate, inverse_ops
from .clifford import CliffordElement, compose, embed, equal_up_to_phase, gate, gate_unitary, SINGLE_QUBIT

N_DATA = 4
ANCILLA = 4


@dataclass(frozen=True)
class CodeGate:
    """One row of the code gate set.

    ``ops`` are (gate name, code position) pairs for the transversal part;
    ``swap`` is the pair of positions relabelled by a virtual gate.
    """

    name: str
    ops: tuple[tuple[str, int], ...]
    logical: CliffordElement
    swap: Optional[tuple[int, int]] = None

    @property
    def virtual(self) -> bool:
        return self.swap is not None

    def physical_unitary(self) -> np.ndarray:
        u = np.eye(16, dtype=complex)
        for name, q in self.ops:
            u = gate_unitary(name, [q], N_DATA) @ u
        if self.swap is not None:
            u = gate_unitary("swap", list(self.swap), N_DATA) @ u
        return u


def _logical(*factors) -> CliffordElement:
    """Product of (gate, qubits) factors, applied left to right."""
    out = CliffordElement.identity(2)
    for name, qubits in factors:
        out = compose(gate(name, qubits, 2), out)
    return out


def _logical_unitary(*factors) -> np.ndarray:
    u = np.eye(4, dtype=complex)
    for name, qubits in factors:
        u = gate_unitary(name, qubits, 2) @ u
    return u


_ROWS = (
    # name, physical ops, logical factors (applied in order), virtual swap
    ("XI", (("x", 0), ("x", 2)), (("x", [0]),), None),
    ("IX", (("x", 0), ("x", 1)), (("x", [1]),), None),
    ("ZI", (("z", 0), ("z", 1)), (("z", [0]),), None),
    ("IZ", (("z", 0), ("z", 2)), (("z", [1]),), None),
    ("HH_SWAP", tuple(("h", q) for q in range(4)), (("h", [0]), ("h", [1]), ("swap", [0, 1])), None),
    ("ZZ_CZ", tuple(("s", q) for q in range(4)), (("cz", [0, 1]), ("z", [0]), ("z", [1])), None),
    ("CNOT12", (), (("cx", [0, 1]),), (0, 1)),
    ("CNOT21", (), (("cx", [1, 0]),), (0, 2)),
)

CODE_GATES: tuple[CodeGate, ...] = tuple(
    CodeGate(name, ops, _logical(*factors), swap) for name, ops, factors, swap in _ROWS
)
CODE_GATE_INDEX = {g.name: i for i, g in enumerate(CODE_GATES)}

# logical Paulis II, IX, XI, XX indexed by target bits (l1, l2) -> 2*l1 + l2
PAULI_TARGETS = ((0, 0), (0, 1), (1, 0), (1, 1))


def codeword_bits(l1: int, l2: int) -> tuple[int, int, int, int]:
    return (l1 ^ l2, l2, l1, 0)


def encoding_isometry() -> np.ndarray:
    """16 x 4 matrix whose columns are the logical basis states |00>..|11>."""
    v = np.zeros((16, 4), dtype=complex)
    for col, (l1, l2) in enumerate(PAULI_TARGETS):
        s = codeword_bits(l1, l2)
        idx = int("".join(map(str, s)), 2)
        v[idx, col] = v[15 - idx, col] = 1 / np.sqrt(2)
    return v


def logical_projection(u: np.ndarray) -> tuple[np.ndarray, float]:
    """Restrict a 16x16 operator to the code space.

    Returns the 4x4 block and the norm of the part leaking out of the code.
    """
    v = encoding_isometry()
    block = v.conj().T @ u @ v
    leak = float(np.linalg.norm(u @ v - v @ block))
    return block, leak


# --- gate table verification ------------------------------------------------

@dataclass(frozen=True)
class TableRow:
    physical: str
    logical: str
    physical_unitaries: tuple
    logical_unitary: np.ndarray


@dataclass(frozen=True)
class RowCheck:
    row: TableRow
    passed: bool
    max_deviation: float


def _tensor(*names: str) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for nm in names:
        out = np.kron(out, SINGLE_QUBIT[nm])
    return out


def gate_table() -> list[TableRow]:
    """The nine physical/logical rows of the code gate set."""
    rows = [
        TableRow("X^4, Z^4", "I (x) I", (_tensor("x", "x", "x", "x"), _tensor("z", "z", "z", "z")), np.eye(4)),
        TableRow("X I X I", "X (x) I", (_tensor("x", "i", "x", "i"),), _logical_unitary(("x", [0]))),
        TableRow("X X I I", "I (x) X", (_tensor("x", "x", "i", "i"),), _logical_unitary(("x", [1]))),
        TableRow("Z Z I I", "Z (x) I", (_tensor("z", "z", "i", "i"),), _logical_unitary(("z", [0]))),
        TableRow("Z I Z I", "I (x) Z", (_tensor("z", "i", "z", "i"),), _logical_unitary(("z", [1]))),
        TableRow("H H H H", "SWAP12 (H (x) H)", (_tensor("h", "h", "h", "h"),),
                 _logical_unitary(("h", [0]), ("h", [1]), ("swap", [0, 1]))),
        TableRow("P P P P", "(Z (x) Z) CZ", (_tensor("s", "s", "s", "s"),),
                 _logical_unitary(("cz", [0, 1]), ("z", [0]), ("z", [1]))),
        TableRow("SWAP12", "CNOT12", (gate_unitary("swap", [0, 1], 4),), _logical_unitary(("cx", [0, 1]))),
        TableRow("SWAP13", "CNOT21", (gate_unitary("swap", [0, 2], 4),), _logical_unitary(("cx", [1, 0]))),
    ]
    return rows


def check_row(row: TableRow, atol: float = 1e-10) -> RowCheck:
    worst = 0.0
    ok = True
    for u in row.physical_unitaries:
        block, leak = logical_projection(u)
        worst = max(worst, leak)
        idx = np.unravel_index(np.argmax(np.abs(row.logical_unitary)), (4, 4))
        ph = block[idx] / row.logical_unitary[idx] if abs(row.logical_unitary[idx]) > 0 else 1.0
        dev = float(np.max(np.abs(block - ph * row.logical_unitary)))
        worst = max(worst, dev)
        ok = ok and leak < atol and equal_up_to_phase(block, row.logical_unitary, atol)
    return RowCheck(row, ok, worst)


def verify_gate_table(rows: Optional[Sequence[TableRow]] = None, atol: float = 1e-10) -> list[RowCheck]:
    return [check_row(r, atol) for r in (gate_table() if rows is None else rows)]


# --- encoding of logical group elements -------------------------------------

@dataclass
class EncodingMap:
    """Per-sequence state: where each code position lives physically.

    With ``virtual=False`` the logical CNOTs are emitted as explicit SWAP
    gates and the frame never changes.
    """

    frame: list[int] = field(default_factory=lambda: list(range(N_DATA)))
    virtual: bool = True

    def __post_init__(self):
        if sorted(self.frame) != list(range(N_DATA)):
            raise ValueError("frame must be a permutation of the four data qubits")

    def place(self, ops: Sequence[tuple[str, int]]) -> list[Gate]:
        return [Gate(name, (self.frame[q],)) for name, q in ops]

    def place_gates(self, gates: Sequence[Gate]) -> list[Gate]:
        """Map gates written on code positions onto physical qubits."""
        return [Gate(g.name, tuple(self.frame[q] if q < N_DATA else q for q in g.qubits)) for g in gates]

    def apply_generator(self, index: int) -> list[Gate]:
        cg = CODE_GATES[index]
        out = self.place(cg.ops)
        if cg.swap is not None:
            i, j = cg.swap
            if self.virtual:
                self.frame[i], self.frame[j] = self.frame[j], self.frame[i]
            else:
                out.append(Gate("swap", (self.frame[i], self.frame[j])))
        return out

    def encode_word(self, word: Sequence[int]) -> list[Gate]:
        ops: list[Gate] = []
        for g in word:
            ops.extend(self.apply_generator(g))
        return ops

    def pauli(self, target: tuple[int, int]) -> list[Gate]:
        """Physical X gates for the logical Pauli X^l1 (x) X^l2."""
        bits = codeword_bits(*target)
        return [Gate("x", (self.frame[q],)) for q in range(N_DATA) if bits[q]]


def encode_logical_gate(g: Union[CliffordElement, int], emap: Optional[EncodingMap] = None,
                        catalog=None) -> tuple[list[Gate], EncodingMap]:
    """Physical gates for an element of R(2), as its minimal code-gate word.

    Virtual gates contribute no physical operation and update ``emap.frame``.
    """
    from .groups import realizable_group

    cat = realizable_group() if catalog is None else catalog
    if isinstance(g, CliffordElement):
        if g.key not in cat.index:
            raise KeyError("element is not in R(2)")
        gid = cat.index[g.key]
    else:
        gid = int(g)
        if not 0 <= gid < len(cat):
            raise KeyError("element id out of range")
    emap = EncodingMap() if emap is None else emap
    return emap.encode_word(cat.words[gid]), emap


# --- state preparation ------------------------------------------------------

PLAIN = "plain"
FAULT_TOLERANT = "fault_tolerant_ancilla"


@dataclass(frozen=True)
class PreparationCircuit:
    mode: str
    gates: tuple[Gate, ...]

    @property
    def n_qubits(self) -> int:
        return N_DATA + (1 if self.mode == FAULT_TOLERANT else 0)


def prepare_logical_00(mode: str = PLAIN) -> PreparationCircuit:
    plain = (Gate("h", (1,)), Gate("cx", (1, 0)), Gate("cx", (1, 2)), Gate("cx", (2, 3)))
    if mode == PLAIN:
        return PreparationCircuit(mode, plain)
    if mode == FAULT_TOLERANT:
        return PreparationCircuit(mode, plain + (Gate("cx", (0, ANCILLA)), Gate("cx", (3, ANCILLA))))
    raise ValueError(f"unknown preparation mode {mode!r}")


# --- measurement decoding ---------------------------------------------------

@dataclass(frozen=True)
class ParityOutcome:
    raw_bits: tuple[int, ...]
    accepted: bool
    logical_bits: Optional[tuple[int, int]] = None


def decode_measurement(raw_bits: Sequence[int], relabel_frame: Optional[Sequence[int]] = None) -> ParityOutcome:
    """Decode four physical bits; ``raw_bits[q]`` is the bit of physical qubit ``q``."""
    raw = tuple(int(b) for b in raw_bits)
    if len(raw) != N_DATA or any(b not in (0, 1) for b in raw):
        raise ValueError("expected four bits")
    frame = range(N_DATA) if relabel_frame is None else relabel_frame
    pos = [raw[frame[i]] for i in range(N_DATA)]
    if sum(pos) % 2:
        return ParityOutcome(raw, False)
    return ParityOutcome(raw, True, (pos[0] ^ pos[1], pos[0] ^ pos[2]))


# --- phased-run frames ------------------------------------------------------

LOGICAL = "logical_422"
BARE = "bare_2q"


def phased_frame_circuit(platform: str) -> tuple[list[Gate], list[Gate]]:
    """Basis-change circuits for the phased runs, written on code positions."""
    if platform == LOGICAL:
        pre = [Gate("h", (q,)) for q in range(N_DATA)] + [Gate("cx", (1, 0)), Gate("s", (0,)), Gate("cx", (1, 0))]
    elif platform == BARE:
        pre = [Gate("h", (0,)), Gate("h", (1,)), Gate("s", (0,)), Gate("s", (1,))]
    else:
        raise ValueError(f"unknown platform {platform!r}")
    return pre, inverse_ops(pre)


def _ops_unitary(gates: Sequence[Gate], n: int) -> np.ndarray:
    u = np.eye(1 << n, dtype=complex)
    for g in gates:
        u = gate_unitary(g.name, g.qubits, n) @ u
    return u


def phased_initial_state(platform: str) -> np.ndarray:
    """Logical two-qubit density matrix after the phased pre-frame on |00>."""
    pre, _ = phased_frame_circuit(platform)
    if platform == LOGICAL:
        v = encoding_isometry()
        psi = v.conj().T @ (_ops_unitary(pre, N_DATA) @ v[:, 0])
    else:
        psi = _ops_unitary(pre, 2)[:, 0]
    return np.outer(psi, psi.conj())


def spam_constants(rho: np.ndarray, effect: np.ndarray) -> tuple[float, float, float]:
    """Real-RB constants (A, B, C) for a state and an effect operator."""
    d = rho.shape[0]
    rho_p = (rho + rho.T) / 2
    rho_m = (rho - rho.T) / 2
    a = float(np.real(np.trace(effect))) / d
    b = float(np.real(np.trace(effect @ rho_p))) - a
    c = float(np.real(np.trace(effect @ rho_m)))
    return a, b, c


def phased_spam_constants(platform: str) -> tuple[float, float, float]:
    """(A, B, C) of a noiseless phased run.

    The post-frame rotates back before reading out |00>, so the effective
    effect operator equals the rotated state itself.
    """
    rho = phased_initial_state(platform)
    return spam_constants(rho, rho)
