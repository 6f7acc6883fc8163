"""CPTP channels, average fidelity and the orthogonal-twirl oracle.

Superoperators use row-major vectorisation, ``vec(A rho B) = (A kron B^T) vec(rho)``.
"""

from __future__ import annotations

import itertools
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .clifford import SINGLE_QUBIT, embed

_PAULI_1Q = [SINGLE_QUBIT[k] for k in ("i", "x", "y", "z")]


class NotCPTPError(ValueError):
    pass


class NoiseChannel:
    """A channel on ``n`` qubits, given by Kraus operators or a superoperator."""

    def __init__(self, kraus: Optional[Sequence[np.ndarray]] = None, superop: Optional[np.ndarray] = None,
                 name: str = "channel"):
        if (kraus is None) == (superop is None):
            raise ValueError("give exactly one of kraus or superop")
        self.name = name
        if kraus is not None:
            ks = [np.asarray(k, dtype=complex) for k in kraus]
            self.dim = ks[0].shape[0]
            self._kraus = ks
            self._superop = None
        else:
            s = np.asarray(superop, dtype=complex)
            self.dim = int(round(np.sqrt(s.shape[0])))
            self._kraus = None
            self._superop = s
        self.n = self.dim.bit_length() - 1

    def __repr__(self) -> str:
        return f"NoiseChannel({self.name!r}, n={self.n})"

    @property
    def kraus(self) -> list[np.ndarray]:
        if self._kraus is None:
            self._kraus = _kraus_from_choi(choi_from_superop(self._superop))
        return self._kraus

    @cached_property
    def superop(self) -> np.ndarray:
        if self._superop is not None:
            return self._superop
        return sum(np.kron(k, k.conj()) for k in self._kraus)

    def is_trace_preserving(self, atol: float = 1e-10) -> bool:
        if self._kraus is not None:
            total = sum(k.conj().T @ k for k in self._kraus)
            return bool(np.allclose(total, np.eye(self.dim), atol=atol))
        # Tr[E(rho)] = Tr[rho]  <=>  vec(I)^T S = vec(I)^T
        vi = np.eye(self.dim).reshape(-1)
        return bool(np.allclose(vi @ self._superop, vi, atol=atol))

    def is_cptp(self, atol: float = 1e-10) -> bool:
        if not self.is_trace_preserving(atol):
            return False
        if self._kraus is not None:
            return True
        evals = np.linalg.eigvalsh(choi_from_superop(self._superop))
        return bool(evals.min() > -1e-9)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        d = self.dim
        return (self.superop @ rho.reshape(-1)).reshape(d, d)

    def compose(self, other: "NoiseChannel") -> "NoiseChannel":
        """Channel ``self o other`` (``other`` acts first)."""
        return NoiseChannel(superop=self.superop @ other.superop, name=f"{self.name}*{other.name}")

    def embedded(self, qubits: Sequence[int], n: int) -> list[np.ndarray]:
        return [embed(k, qubits, n) for k in self.kraus]


def choi_from_superop(s: np.ndarray) -> np.ndarray:
    """Choi matrix ``sum_ij E(|i><j|) (x) |i><j|``, reshuffled from the superop."""
    d = int(round(np.sqrt(s.shape[0])))
    # s[(a,b),(i,j)] = <a|E(|i><j|)|b>;  choi[(a,i),(b,j)] = same
    return s.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)


def _kraus_from_choi(choi: np.ndarray, tol: float = 1e-12) -> list[np.ndarray]:
    d = int(round(np.sqrt(choi.shape[0])))
    evals, evecs = np.linalg.eigh(choi)
    if evals.min() < -1e-9:
        raise NotCPTPError("channel is not completely positive")
    out = []
    for lam, v in zip(evals, evecs.T):
        if lam > tol:
            out.append(np.sqrt(lam) * v.reshape(d, d))
    return out


# --- constructors -----------------------------------------------------------

def identity_channel(n: int = 1) -> NoiseChannel:
    return NoiseChannel([np.eye(1 << n)], name="identity")


def unitary_channel(u: np.ndarray, name: str = "unitary") -> NoiseChannel:
    return NoiseChannel([u], name=name)


def pauli_basis(n: int) -> list[np.ndarray]:
    out = []
    for combo in itertools.product(_PAULI_1Q, repeat=n):
        m = np.array([[1.0 + 0j]])
        for p in combo:
            m = np.kron(m, p)
        out.append(m)
    return out


def depolarizing(p: float, n: int = 1) -> NoiseChannel:
    """``rho -> (1 - p) rho + p Tr[rho] I / d``."""
    if not 0 <= p <= 1 + 1 / (4**n - 1):
        raise NotCPTPError(f"depolarizing parameter {p} outside the CPTP range")
    d = 1 << n
    vi = np.eye(d).reshape(-1)
    s = (1 - p) * np.eye(d * d) + p * np.outer(vi, vi) / d
    return NoiseChannel(superop=s.astype(complex), name=f"depolarizing({p})")


def pauli_channel(probs: dict[str, float]) -> NoiseChannel:
    """Channel applying Pauli ``label`` with probability ``probs[label]``."""
    total = sum(probs.values())
    if any(v < 0 for v in probs.values()) or abs(total - 1) > 1e-12:
        raise NotCPTPError("Pauli probabilities must be non-negative and sum to one")
    n = len(next(iter(probs)))
    letters = {"I": 0, "X": 1, "Y": 2, "Z": 3}
    ks = []
    for label, pr in probs.items():
        m = np.array([[1.0 + 0j]])
        for ch in label:
            m = np.kron(m, _PAULI_1Q[letters[ch]])
        if pr > 0:
            ks.append(np.sqrt(pr) * m)
    del n
    return NoiseChannel(ks, name="pauli")


def bit_flip(p: float) -> NoiseChannel:
    return pauli_channel({"I": 1 - p, "X": p})


def phase_flip(p: float) -> NoiseChannel:
    return pauli_channel({"I": 1 - p, "Z": p})


def amplitude_damping(gamma: float) -> NoiseChannel:
    if not 0 <= gamma <= 1:
        raise NotCPTPError("damping must lie in [0, 1]")
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    return NoiseChannel([k0, k1], name=f"amplitude_damping({gamma})")


def zz_unitary(theta: float) -> np.ndarray:
    """``exp(i theta Z (x) Z)`` on two qubits (diagonal)."""
    zz = np.array([1, -1, -1, 1])
    return np.diag(np.exp(1j * theta * zz))


def zz_crosstalk_channel(theta: float, pair: Sequence[int] = (0, 1), n: int = 2) -> NoiseChannel:
    if len(pair) != 2 or pair[0] == pair[1]:
        raise ValueError("crosstalk needs two distinct qubits")
    if not np.isfinite(theta):
        raise ValueError("theta must be finite")
    return NoiseChannel([embed(zz_unitary(theta), list(pair), n)], name=f"zz({theta})")


def random_cptp(n: int, rank: int, rng: np.random.Generator) -> NoiseChannel:
    """Random channel from a Haar-ish isometry, for property tests."""
    d = 1 << n
    g = rng.normal(size=(d * rank, d)) + 1j * rng.normal(size=(d * rank, d))
    q, _ = np.linalg.qr(g)
    return NoiseChannel([q[i * d:(i + 1) * d] for i in range(rank)], name="random")


# --- fidelities -------------------------------------------------------------

def entanglement_fidelity(channel: NoiseChannel) -> float:
    d = channel.dim
    # Tr of the superop equals sum_k |Tr K_k|^2
    return float(np.real(np.trace(channel.superop))) / d**2


def channel_avg_fidelity(channel: NoiseChannel) -> float:
    """Haar-averaged fidelity with the identity, ``(d F_e + 1) / (d + 1)``."""
    if not channel.is_cptp():
        raise NotCPTPError("average fidelity needs a CPTP channel")
    d = channel.dim
    return (d * entanglement_fidelity(channel) + 1) / (d + 1)


def pauli_transfer_matrix(channel: NoiseChannel) -> np.ndarray:
    """``R_ij = Tr[P_i E(P_j)] / d`` in the tensor-Pauli basis (I, X, Y, Z per qubit)."""
    d = channel.dim
    basis = pauli_basis(channel.n)
    vecs = np.array([p.reshape(-1) for p in basis])  # rows vec(P_j)
    images = vecs @ channel.superop.T  # rows vec(E(P_j))
    # Tr[P_i M] = sum_ab P_i[b,a] M[a,b] = vec(P_i^T) . vec(M)
    return np.real(np.array([p.T.reshape(-1) for p in basis]) @ images.T) / d


def pauli_sectors(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices of traceless symmetric (even Y count) and antisymmetric Paulis."""
    sym, anti = [], []
    for idx, combo in enumerate(itertools.product(range(4), repeat=n)):
        if idx == 0:
            continue
        (anti if sum(c == 2 for c in combo) % 2 else sym).append(idx)
    return np.array(sym), np.array(anti)


class NotTwoDesignError(ValueError):
    pass


def twirl_superop(unitaries: np.ndarray, channel: NoiseChannel) -> np.ndarray:
    """``(1/|G|) sum_g  g^dagger o E o g`` as a superoperator."""
    s = channel.superop
    acc = np.zeros_like(s)
    for u in unitaries:
        su = np.kron(u, u.conj())
        acc += su.conj().T @ s @ su
    return acc / len(unitaries)


def twirl_oracle(catalog, channel: NoiseChannel, check_design: bool = True) -> tuple[float, float]:
    """Exact orthogonal-twirl decay parameters ``(b, c)`` of ``channel``.

    The group average is carried out explicitly; ``b`` and ``c`` are then the
    mean Pauli-transfer eigenvalues on the symmetric and antisymmetric
    traceless sectors (dimensions 9 and 6 for two qubits).
    """
    from .groups import frame_potential

    if check_design and abs(frame_potential(catalog) - 3.0) > 1e-9:
        raise NotTwoDesignError("catalog is not an orthogonal 2-design")
    twirled = NoiseChannel(superop=twirl_superop(catalog.unitaries(), channel), name="twirled")
    r = pauli_transfer_matrix(twirled)
    sym, anti = pauli_sectors(channel.n)
    b = float(np.mean(np.diag(r)[sym]))
    c = float(np.mean(np.diag(r)[anti]))
    return b, c


def twirled_channel(catalog, channel: NoiseChannel) -> NoiseChannel:
    return NoiseChannel(superop=twirl_superop(catalog.unitaries(), channel), name="twirled")


def fidelity_from_bc(b: float, c: float) -> float:
    return (9 * b + 6 * c + 5) / 20
