"""Group closure, minimal generator words and frame potentials.

A :class:`GroupCatalog` is built by breadth-first search from a list of named
generators. Words are stored in circuit order: the word ``(g1, g2, g3)``
means ``g1`` is applied first, so the element is ``g3 . g2 . g1``. Among
words of equal length the lexicographically smallest (by generator index) is
kept, which BFS gives for free when parents are expanded in discovery order.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .clifford import CliffordElement, compose, gate, inverse, to_unitary

CATALOG_HEADER = "# rb422-catalog v1"


class CatalogCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class NamedGenerator:
    name: str
    element: CliffordElement


@dataclass
class GroupCatalog:
    """Closure of a generator set with one minimal word per element.

    ``elements[i]`` has word ``words[i]``; ``index`` maps canonical keys to
    element ids. Element 0 is always the identity.
    """

    generators: list[NamedGenerator]
    elements: list[CliffordElement] = field(default_factory=list)
    words: list[tuple[int, ...]] = field(default_factory=list)
    index: dict[tuple, int] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.generators[0].element.n

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, element: CliffordElement) -> bool:
        return element.key in self.index

    def id_of(self, element: CliffordElement) -> int:
        try:
            return self.index[element.key]
        except KeyError:
            raise KeyError("element is not in the catalog") from None

    def word_names(self, element_id: int) -> list[str]:
        return [self.generators[g].name for g in self.words[element_id]]

    def multiply(self, a: int, b: int) -> int:
        """Id of ``elements[a] . elements[b]``."""
        return self.index[compose(self.elements[a], self.elements[b]).key]

    def inverse_id(self, a: int) -> int:
        return self.index[inverse(self.elements[a]).key]

    def mean_word_length(self) -> float:
        return float(np.mean([len(w) for w in self.words]))

    def unitaries(self) -> np.ndarray:
        return _unitaries(self)


def _unitaries(catalog: GroupCatalog) -> np.ndarray:
    cached = getattr(catalog, "_unitary_cache", None)
    if cached is None:
        cached = np.array([to_unitary(e) for e in catalog.elements])
        catalog._unitary_cache = cached
    return cached


def generate_group(generators: Sequence[NamedGenerator], cap: int = 100_000) -> GroupCatalog:
    if not generators:
        raise ValueError("need at least one generator")
    n = generators[0].element.n
    if any(g.element.n != n for g in generators):
        raise ValueError("generators act on different numbers of qubits")
    cat = GroupCatalog(list(generators))
    ident = CliffordElement.identity(n)
    cat.elements.append(ident)
    cat.words.append(())
    cat.index[ident.key] = 0
    queue = deque([0])
    gens = [g.element for g in generators]
    while queue:
        parent = queue.popleft()
        pel = cat.elements[parent]
        pword = cat.words[parent]
        for gi, g in enumerate(gens):
            child = compose(g, pel)
            key = child.key
            if key in cat.index:
                continue
            if len(cat.elements) >= cap:
                raise CatalogCapExceeded(f"closure exceeded cap of {cap} elements")
            cat.index[key] = len(cat.elements)
            cat.elements.append(child)
            cat.words.append(pword + (gi,))
            queue.append(cat.index[key])
    return cat


def minimal_word(catalog: GroupCatalog, element: CliffordElement) -> tuple[int, ...]:
    return catalog.words[catalog.id_of(element)]


def word_element(catalog: GroupCatalog, word: Iterable[int]) -> CliffordElement:
    out = CliffordElement.identity(catalog.n)
    for g in word:
        out = compose(catalog.generators[g].element, out)
    return out


def frame_potential(catalog: GroupCatalog) -> float:
    """Mean of ``|Tr g|**4`` over the group."""
    us = catalog.unitaries()
    traces = np.abs(np.einsum("kii->k", us))
    return float(np.mean(traces**4))


# --- catalog persistence ---------------------------------------------------

def _key_to_text(key: tuple) -> str:
    return ";".join(f"{x},{z},{s}" for x, z, s in key)


def _key_from_text(text: str) -> tuple:
    return tuple(tuple(int(v) for v in part.split(",")) for part in text.split(";"))


def save_catalog(catalog: GroupCatalog, path: str | Path) -> None:
    """Write ``n``, generator names and one ``key<TAB>word`` line per element.

    The key is the conjugation table ``x,z,sign`` for ``X_0..Z_{n-1}``
    separated by ``;``; the word is space-separated generator indices.
    """
    lines = [CATALOG_HEADER, f"n {catalog.n}"]
    for g in catalog.generators:
        lines.append(f"generator {g.name}\t{_key_to_text(g.element.key)}")
    for el, word in zip(catalog.elements, catalog.words):
        lines.append(f"{_key_to_text(el.key)}\t{' '.join(map(str, word))}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_catalog(path: str | Path) -> GroupCatalog:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CATALOG_HEADER:
        raise ValueError("not a catalog file")
    n = int(lines[1].split()[1])
    gens = []
    elements, words, index = [], [], {}
    for line in lines[2:]:
        if not line:
            continue
        if line.startswith("generator "):
            name, key = line[len("generator "):].split("\t")
            gens.append(NamedGenerator(name, CliffordElement(n, _key_from_text(key))))
            continue
        key_text, _, word_text = line.partition("\t")
        el = CliffordElement(n, _key_from_text(key_text))
        index[el.key] = len(elements)
        elements.append(el)
        words.append(tuple(int(w) for w in word_text.split()))
    return GroupCatalog(gens, elements, words, index)


# --- the generator sets used throughout -------------------------------------

def logical_code_generators() -> list[NamedGenerator]:
    """Logical actions of the eight code gates, in gate-table order."""
    from .code import CODE_GATES

    return [NamedGenerator(g.name, g.logical) for g in CODE_GATES]


def clifford_generators() -> list[NamedGenerator]:
    """X, Z, H, P on either qubit plus CNOT 1->2."""
    gens = []
    for name in ("x", "z", "h", "s"):
        for q in (0, 1):
            gens.append(NamedGenerator(f"{name}{q + 1}", gate(name, [q], 2)))
    gens.append(NamedGenerator("cx12", gate("cx", [0, 1], 2)))
    return gens


def real_clifford_generators() -> list[NamedGenerator]:
    """X, Z, H on either qubit plus CNOT 1->2 (all real matrices)."""
    return [g for g in clifford_generators() if not g.name.startswith("s")]


def pauli_generators_1q() -> list[NamedGenerator]:
    return [NamedGenerator("x", gate("x", [0], 1)), NamedGenerator("z", gate("z", [0], 1))]


@lru_cache(maxsize=None)
def realizable_group() -> GroupCatalog:
    """R(2): closure of the logical code gate set (576 elements)."""
    return generate_group(logical_code_generators(), cap=600)


@lru_cache(maxsize=None)
def real_clifford_group() -> GroupCatalog:
    """C_R(2), generated by {X, Z, H, CNOT} (1,152 elements)."""
    return generate_group(real_clifford_generators(), cap=1200)


@lru_cache(maxsize=None)
def clifford_group() -> GroupCatalog:
    """C(2) over {X, Z, H, P, CNOT} (11,520 elements)."""
    return generate_group(clifford_generators(), cap=12_000)
