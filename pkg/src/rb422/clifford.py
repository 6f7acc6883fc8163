"""Pauli and Clifford algebra on a handful of qubits.

Conventions
-----------
Qubit 0 is the leftmost tensor factor. A Pauli on ``n`` qubits is stored as
two integer bit masks ``x`` and ``z`` plus a phase exponent ``k`` (mod 4),
meaning ``i**k * X**x Z**z``. Qubit ``j`` lives in bit ``n - 1 - j`` of the
masks, so the masks line up with computational basis indices:
``X**x Z**z |c> = (-1)**popcount(z & c) |c ^ x>``.

A Clifford is stored as its conjugation action ``P -> U P U^dagger`` on the
generators ``X_0..X_{n-1}, Z_0..Z_{n-1}``. Every image is a Hermitian Pauli,
so it is fully described by its masks and one sign bit. The tuple of images
is the canonical key: it identifies the unitary up to a global phase.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

MAX_DENSE_QUBITS = 5

_PHASES = (1, 1j, -1, -1j)


def _popcount(v: int) -> int:
    return bin(v).count("1")


def pauli_mul(a: tuple[int, int, int], b: tuple[int, int, int]) -> tuple[int, int, int]:
    """Multiply two Paulis given as ``(x, z, k)`` triples."""
    x1, z1, k1 = a
    x2, z2, k2 = b
    # Z^z1 X^x2 = (-1)^{z1.x2} X^x2 Z^z1
    return x1 ^ x2, z1 ^ z2, (k1 + k2 + 2 * _popcount(z1 & x2)) & 3


@dataclass(frozen=True)
class PauliOperator:
    """``phase * X**x Z**z`` on ``n`` qubits, with phase in {1, i, -1, -i}."""

    n: int
    x: int
    z: int
    k: int = 0

    def __post_init__(self):
        limit = 1 << self.n
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise ValueError("bit masks do not fit in n qubits")
        object.__setattr__(self, "k", self.k & 3)

    @classmethod
    def from_label(cls, label: str) -> "PauliOperator":
        """Build from a string such as ``"-iXYZI"`` (qubit 0 first)."""
        sign = 0
        s = label
        if s.startswith("-"):
            sign, s = 2, s[1:]
        elif s.startswith("+"):
            s = s[1:]
        if s.startswith("i"):
            sign, s = sign + 1, s[1:]
        n = len(s)
        x = z = 0
        ys = 0
        for j, ch in enumerate(s):
            bit = 1 << (n - 1 - j)
            if ch == "X":
                x |= bit
            elif ch == "Z":
                z |= bit
            elif ch == "Y":
                x |= bit
                z |= bit
                ys += 1
            elif ch != "I":
                raise ValueError(f"bad Pauli letter {ch!r}")
        # Y = i X Z
        return cls(n, x, z, sign + ys)

    @property
    def phase(self) -> complex:
        return _PHASES[self.k]

    @property
    def x_bits(self) -> np.ndarray:
        return np.array([(self.x >> (self.n - 1 - j)) & 1 for j in range(self.n)], dtype=np.uint8)

    @property
    def z_bits(self) -> np.ndarray:
        return np.array([(self.z >> (self.n - 1 - j)) & 1 for j in range(self.n)], dtype=np.uint8)

    @property
    def triple(self) -> tuple[int, int, int]:
        return self.x, self.z, self.k

    def __mul__(self, other: "PauliOperator") -> "PauliOperator":
        if self.n != other.n:
            raise ValueError("qubit count mismatch")
        return PauliOperator(self.n, *pauli_mul(self.triple, other.triple))

    def is_hermitian(self) -> bool:
        return (self.k - _popcount(self.x & self.z)) % 2 == 0

    def commutes(self, other: "PauliOperator") -> bool:
        return (_popcount(self.x & other.z) + _popcount(self.z & other.x)) % 2 == 0

    def to_matrix(self) -> np.ndarray:
        return pauli_matrix(self.n, self.x, self.z, self.k)

    def label(self) -> str:
        letters = []
        ys = 0
        for j in range(self.n):
            bit = 1 << (self.n - 1 - j)
            xb, zb = bool(self.x & bit), bool(self.z & bit)
            if xb and zb:
                letters.append("Y")
                ys += 1
            else:
                letters.append("X" if xb else "Z" if zb else "I")
        k = (self.k - ys) & 3
        return ("", "i", "-", "-i")[k] + "".join(letters)

    def __repr__(self) -> str:
        return f"PauliOperator({self.label()!r})"


def pauli_matrix(n: int, x: int, z: int, k: int = 0) -> np.ndarray:
    dim = 1 << n
    cols = np.arange(dim)
    signs = np.array([(-1) ** _popcount(z & c) for c in range(dim)], dtype=complex)
    mat = np.zeros((dim, dim), dtype=complex)
    mat[cols ^ x, cols] = signs * _PHASES[k & 3]
    return mat


def _identify_pauli(mat: np.ndarray, n: int, atol: float = 1e-9) -> tuple[int, int, int]:
    """Read ``(x, z, k)`` back off a dense matrix known to be a Pauli."""
    col0 = mat[:, 0]
    x = int(np.argmax(np.abs(col0)))
    val = col0[x]
    k = None
    for kk, ph in enumerate(_PHASES):
        if abs(val - ph) < atol:
            k = kk
    if k is None:
        raise ValueError("matrix is not a Pauli operator")
    z = 0
    for j in range(n):
        bit = 1 << (n - 1 - j)
        if abs(mat[bit ^ x, bit] + val) < atol:
            z |= bit
    if not np.allclose(mat, pauli_matrix(n, x, z, k), atol=atol):
        raise ValueError("matrix is not a Pauli operator")
    return x, z, k


@dataclass(frozen=True)
class CliffordElement:
    """An ``n``-qubit Clifford modulo global phase.

    ``images`` holds ``(x, z, sign)`` for the conjugated generators, in the
    order ``X_0..X_{n-1}, Z_0..Z_{n-1}``.
    """

    n: int
    images: tuple[tuple[int, int, int], ...]

    @classmethod
    def identity(cls, n: int) -> "CliffordElement":
        xs = tuple((1 << (n - 1 - j), 0, 0) for j in range(n))
        zs = tuple((0, 1 << (n - 1 - j), 0) for j in range(n))
        return cls(n, xs + zs)

    @classmethod
    def from_unitary(cls, u: np.ndarray, atol: float = 1e-9) -> "CliffordElement":
        u = np.asarray(u, dtype=complex)
        dim = u.shape[0]
        n = dim.bit_length() - 1
        if u.shape != (dim, dim) or (1 << n) != dim:
            raise ValueError("unitary must be square with power-of-two size")
        udag = u.conj().T
        images = []
        for kind in ("x", "z"):
            for j in range(n):
                bit = 1 << (n - 1 - j)
                p = pauli_matrix(n, bit, 0) if kind == "x" else pauli_matrix(n, 0, bit)
                x, z, k = _identify_pauli(u @ p @ udag, n, atol)
                images.append((x, z, _sign_bit(x, z, k)))
        return cls(n, tuple(images))

    @property
    def key(self) -> tuple:
        return self.images

    @cached_property
    def _image_triples(self) -> tuple[tuple[int, int, int], ...]:
        return tuple((x, z, (_popcount(x & z) + 2 * s) & 3) for x, z, s in self.images)

    @property
    def symplectic(self) -> np.ndarray:
        """2n x 2n GF(2) matrix; column ``c`` is the image of generator ``c``
        written as ``[x bits; z bits]`` (qubit 0 first)."""
        n = self.n
        m = np.zeros((2 * n, 2 * n), dtype=np.uint8)
        for c, (x, z, _) in enumerate(self.images):
            for j in range(n):
                m[j, c] = (x >> (n - 1 - j)) & 1
                m[n + j, c] = (z >> (n - 1 - j)) & 1
        return m

    @property
    def phase_bits(self) -> np.ndarray:
        return np.array([s for _, _, s in self.images], dtype=np.uint8)

    def is_identity(self) -> bool:
        return self.images == CliffordElement.identity(self.n).images

    def conjugate(self, pauli: tuple[int, int, int]) -> tuple[int, int, int]:
        """Image of ``i**k X**x Z**z`` under ``P -> U P U^dagger``."""
        x, z, k = pauli
        n = self.n
        imgs = self._image_triples
        out = (0, 0, k)
        for j in range(n):
            if (x >> (n - 1 - j)) & 1:
                out = pauli_mul(out, imgs[j])
        for j in range(n):
            if (z >> (n - 1 - j)) & 1:
                out = pauli_mul(out, imgs[n + j])
        return out

    def conjugate_pauli(self, p: PauliOperator) -> PauliOperator:
        if p.n != self.n:
            raise ValueError("qubit count mismatch")
        return PauliOperator(self.n, *self.conjugate(p.triple))

    def to_unitary(self) -> np.ndarray:
        return to_unitary(self)

    def __matmul__(self, other: "CliffordElement") -> "CliffordElement":
        return compose(self, other)


def _sign_bit(x: int, z: int, k: int) -> int:
    r = (k - _popcount(x & z)) & 3
    if r & 1:
        raise ValueError("image is not Hermitian")
    return r >> 1


def compose(a: CliffordElement, b: CliffordElement) -> CliffordElement:
    """Product ``a . b`` (``b`` acts first)."""
    if a.n != b.n:
        raise ValueError(f"qubit count mismatch: {a.n} vs {b.n}")
    images = []
    for x, z, k in b._image_triples:
        x2, z2, k2 = a.conjugate((x, z, k))
        images.append((x2, z2, _sign_bit(x2, z2, k2)))
    return CliffordElement(a.n, tuple(images))


def inverse(a: CliffordElement) -> CliffordElement:
    n = a.n
    m = a.symplectic.astype(np.int64)
    omega = np.zeros((2 * n, 2 * n), dtype=np.int64)
    omega[:n, n:] = np.eye(n, dtype=np.int64)
    omega[n:, :n] = np.eye(n, dtype=np.int64)
    minv = (omega @ m.T @ omega) % 2
    images = []
    for c in range(2 * n):
        x = z = 0
        for j in range(n):
            if minv[j, c]:
                x |= 1 << (n - 1 - j)
            if minv[n + j, c]:
                z |= 1 << (n - 1 - j)
        images.append((x, z, 0))
    guess = CliffordElement(n, tuple(images))
    # a . guess has trivial symplectic part: it is a Pauli conjugation, which is self-inverse
    return compose(guess, compose(a, guess))


def symplectic_form(n: int) -> np.ndarray:
    omega = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    omega[:n, n:] = np.eye(n, dtype=np.uint8)
    omega[n:, :n] = np.eye(n, dtype=np.uint8)
    return omega


def is_symplectic(m: np.ndarray) -> bool:
    n = m.shape[0] // 2
    omega = symplectic_form(n).astype(np.int64)
    mm = m.astype(np.int64)
    return bool(np.array_equal((mm.T @ omega @ mm) % 2, omega))


def to_unitary(a: CliffordElement) -> np.ndarray:
    """Dense unitary for ``a``, fixed up to a global phase.

    Built from the stabilizer state ``U|0...0>`` (the joint +1 eigenvector of
    the images of ``Z_j``) and the columns ``U|c> = U X^c U^dagger U|0>``.
    The phase is normalised so the largest-magnitude entry of the first
    column is real and positive.
    """
    n = a.n
    if n > MAX_DENSE_QUBITS:
        raise ValueError(f"dense realization limited to {MAX_DENSE_QUBITS} qubits, got {n}")
    dim = 1 << n
    triples = a._image_triples
    proj = np.eye(dim, dtype=complex)
    for j in range(n):
        proj = proj @ (np.eye(dim) + pauli_matrix(n, *triples[n + j])) / 2
    col = int(np.argmax(np.linalg.norm(proj, axis=0)))
    psi = proj[:, col]
    psi = psi / np.linalg.norm(psi)
    lead = int(np.argmax(np.abs(psi)))
    psi = psi * (abs(psi[lead]) / psi[lead])
    u = np.empty((dim, dim), dtype=complex)
    for c in range(dim):
        img = (0, 0, 0)
        for j in range(n):
            if (c >> (n - 1 - j)) & 1:
                img = pauli_mul(img, triples[j])
        u[:, c] = pauli_matrix(n, *img) @ psi
    return u


def equal_up_to_phase(u: np.ndarray, v: np.ndarray, atol: float = 1e-10) -> bool:
    """True when ``u = e^{i phi} v`` for some phase."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        return False
    idx = np.unravel_index(np.argmax(np.abs(v)), v.shape)
    if abs(v[idx]) < atol:
        return bool(np.allclose(u, v, atol=atol))
    ph = u[idx] / v[idx]
    if abs(abs(ph) - 1) > 1e-8:
        return False
    return bool(np.allclose(u, ph * v, atol=atol))


# --- standard gates --------------------------------------------------------

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_P = np.diag([1, 1j])
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.diag([1.0 + 0j, -1.0])
_Y = np.array([[0, -1j], [1j, 0]])

SINGLE_QUBIT = {"i": np.eye(2, dtype=complex), "x": _X, "y": _Y, "z": _Z, "h": _H, "s": _P, "sdg": _P.conj().T}


def embed(op: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Embed a ``k``-qubit operator acting on ``qubits`` into ``n`` qubits."""
    k = len(qubits)
    if op.shape != (1 << k, 1 << k):
        raise ValueError("operator size does not match qubit list")
    if len(set(qubits)) != k or any(q < 0 or q >= n for q in qubits):
        raise ValueError(f"bad qubit indices {qubits} for {n} qubits")
    rest = [q for q in range(n) if q not in qubits]
    order = list(qubits) + rest
    full = np.kron(op, np.eye(1 << (n - k)))
    t = full.reshape([2] * (2 * n))
    inv = np.argsort(order)
    perm = list(inv) + [n + i for i in inv]
    return t.transpose(perm).reshape(1 << n, 1 << n)


def cnot_matrix() -> np.ndarray:
    m = np.eye(4, dtype=complex)
    m[[2, 3]] = m[[3, 2]]
    return m


def cz_matrix() -> np.ndarray:
    return np.diag([1, 1, 1, -1]).astype(complex)


def swap_matrix() -> np.ndarray:
    m = np.eye(4, dtype=complex)
    m[[1, 2]] = m[[2, 1]]
    return m


TWO_QUBIT = {"cx": cnot_matrix(), "cz": cz_matrix(), "swap": swap_matrix()}


def gate_unitary(name: str, qubits: Sequence[int], n: int) -> np.ndarray:
    if name in SINGLE_QUBIT:
        return embed(SINGLE_QUBIT[name], qubits, n)
    if name in TWO_QUBIT:
        return embed(TWO_QUBIT[name], qubits, n)
    raise KeyError(f"unknown gate {name!r}")


def gate(name: str, qubits: Sequence[int], n: int) -> CliffordElement:
    """Clifford element for a named gate (``x z y h s sdg cx cz swap``)."""
    return CliffordElement.from_unitary(gate_unitary(name, qubits, n))
