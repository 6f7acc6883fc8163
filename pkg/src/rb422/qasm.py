"""OpenQASM 2.0 export for the 16-qubit device, a subset parser, and count ingestion.

Data qubits q1..q4 sit on device qubits 5, 12, 13, 14, the preparation
ancilla on 4, and the bare pair (q1, q2) on (12, 5). CNOTs are emitted only
along the device's directed edges: a reversed CNOT gets four Hadamards, and
a CNOT between non-adjacent qubits goes through a neighbour ``m`` as
``CNOT(c,m) CNOT(m,t) CNOT(c,m) CNOT(m,t)`` (time order).

Count files hold one ``bitstring count`` pair per line. In circuit order the
first character is classical bit ``c[0]``; device order is the reverse.
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from . import code
from .circuit import BARRIER, Barrier, Circuit, Gate
from .protocol import (SurvivalRecord, classify_counts, platform_of, realize_physical, sample_sequence,
                       sequence_seeds)
from .simulator import NoiseModel, Simulator, outcome_probabilities, sample_counts

QASM_GATES = frozenset({"id", "x", "y", "z", "h", "s", "sdg", "cx"})
HEADER = "OPENQASM 2.0;"
INCLUDE = 'include "qelib1.inc";'


class QasmError(ValueError):
    pass


class RoutingError(ValueError):
    pass


class IngestError(ValueError):
    pass


# --- device -----------------------------------------------------------------

QX5_EDGES = (
    (1, 2), (2, 3), (3, 4), (5, 4), (6, 5), (6, 7), (8, 7), (9, 10), (11, 10), (12, 11), (12, 13),
    (13, 14), (15, 14), (15, 0), (1, 0), (15, 2), (3, 14), (13, 4), (12, 5), (6, 11), (7, 10), (9, 8),
)


@dataclass(frozen=True)
class DeviceTopology:
    n_qubits: int = 16
    edges: frozenset = frozenset(QX5_EDGES)
    data: tuple[int, ...] = (5, 12, 13, 14)
    ancilla: int = 4
    bare: tuple[int, ...] = (12, 5)

    def __post_init__(self):
        used = list(self.data) + [self.ancilla]
        if len(set(used)) != len(used) or len(set(self.bare)) != len(self.bare):
            raise RoutingError("role map reuses a device qubit")
        for q in used + list(self.bare) + [q for e in self.edges for q in e]:
            if not 0 <= q < self.n_qubits:
                raise RoutingError(f"qubit {q} outside the device")

    def allows(self, control: int, target: int) -> bool:
        return (control, target) in self.edges

    def neighbours(self, q: int) -> set[int]:
        return {b for a, b in self.edges if a == q} | {a for a, b in self.edges if b == q}

    def layout(self, platform: str, ancilla: bool = False) -> tuple[int, ...]:
        """Device qubit of each local simulator qubit."""
        if platform == code.BARE:
            return tuple(self.bare)
        return tuple(self.data) + ((self.ancilla,) if ancilla else ())

    def path(self, a: int, b: int, prefer: Iterable[int] = ()) -> list[int]:
        """Shortest undirected path, through ``prefer`` qubits when one exists."""
        prefer = set(prefer) | {a, b}
        for allowed in (prefer, None):
            prev = {a: None}
            todo = deque([a])
            while todo:
                q = todo.popleft()
                if q == b:
                    out = [b]
                    while prev[out[-1]] is not None:
                        out.append(prev[out[-1]])
                    return out[::-1]
                for nb in sorted(self.neighbours(q)):
                    if nb not in prev and (allowed is None or nb in allowed):
                        prev[nb] = q
                        todo.append(nb)
        raise RoutingError(f"no path between device qubits {a} and {b}")


DEFAULT_TOPOLOGY = DeviceTopology()


def route_cx(control: int, target: int, topo: DeviceTopology, prefer: Iterable[int] = ()) -> list[tuple]:
    """Device-level ``(name, qubits)`` ops realizing CNOT(control -> target)."""
    if control == target:
        raise RoutingError("CNOT needs two distinct qubits")
    if topo.allows(control, target):
        return [("cx", (control, target))]
    if topo.allows(target, control):
        hs = [("h", (control,)), ("h", (target,))]
        return hs + [("cx", (target, control))] + hs
    path = topo.path(control, target, prefer)
    mid = path[1]
    cm = route_cx(control, mid, topo, prefer)
    mt = route_cx(mid, target, topo, prefer)
    return cm + mt + cm + mt


def lower_gate(g: Gate, layout: Sequence[int], topo: DeviceTopology) -> list[tuple]:
    q = [layout[i] for i in g.qubits]
    if g.name in ("x", "y", "z", "h", "s", "sdg"):
        return [(g.name, (q[0],))]
    if g.name == "cx":
        return route_cx(q[0], q[1], topo, layout)
    if g.name == "cz":
        return [("h", (q[1],))] + route_cx(q[0], q[1], topo, layout) + [("h", (q[1],))]
    if g.name == "swap":
        return (route_cx(q[0], q[1], topo, layout) + route_cx(q[1], q[0], topo, layout)
                + route_cx(q[0], q[1], topo, layout))
    raise RoutingError(f"no lowering for gate {g.name!r}")


def circuit_to_qasm(circ: Circuit, layout: Sequence[int], topo: DeviceTopology = DEFAULT_TOPOLOGY) -> str:
    if len(layout) != circ.n or len(set(layout)) != circ.n:
        raise RoutingError("layout must give a distinct device qubit per circuit qubit")
    lines = [HEADER, INCLUDE, f"qreg q[{topo.n_qubits}];", f"creg c[{len(circ.measure)}];"]
    used = ",".join(f"q[{d}]" for d in layout)
    for op in circ.ops:
        if isinstance(op, Barrier):
            lines.append(f"barrier {used};")
            continue
        for name, qs in lower_gate(op, layout, topo):
            lines.append(f"{name} " + ",".join(f"q[{d}]" for d in qs) + ";")
    for j, local in enumerate(circ.measure):
        lines.append(f"measure q[{layout[local]}] -> c[{j}];")
    return "\n".join(lines) + "\n"


# --- parsing ----------------------------------------------------------------

_ARG = r"q\[(\d+)\]"
_RE_QREG = re.compile(r"^qreg\s+q\[(\d+)\]$")
_RE_CREG = re.compile(r"^creg\s+c\[(\d+)\]$")
_RE_GATE = re.compile(rf"^([a-z]+)\s+{_ARG}(?:\s*,\s*{_ARG})?$")
_RE_BARRIER = re.compile(rf"^barrier\s+({_ARG}(?:\s*,\s*{_ARG})*)$")
_RE_MEASURE = re.compile(rf"^measure\s+{_ARG}\s*->\s*c\[(\d+)\]$")


@dataclass
class QasmProgram:
    n_qubits: int
    n_clbits: int
    ops: list = field(default_factory=list)  # ("gate", name, qubits) or ("barrier", qubits)
    measures: list = field(default_factory=list)  # (qubit, clbit)

    def used_qubits(self) -> set[int]:
        out = {q for op in self.ops if op[0] == "gate" for q in op[2]}
        return out | {q for q, _ in self.measures}

    def cx_edges(self) -> list[tuple[int, int]]:
        return [op[2] for op in self.ops if op[0] == "gate" and op[1] == "cx"]


def _statements(text: str) -> list[tuple[int, str]]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("//", 1)[0]
        for stmt in line.split(";")[:-1]:
            if stmt.strip():
                out.append((lineno, " ".join(stmt.split())))
        if line.split(";")[-1].strip():
            raise QasmError(f"line {lineno}: missing semicolon")
    return out


def parse_qasm(text: str) -> QasmProgram:
    """Parse the OpenQASM 2.0 subset produced by :func:`circuit_to_qasm`."""
    stmts = _statements(text)
    if len(stmts) < 4 or stmts[0][1] != HEADER[:-1]:
        raise QasmError("program must start with 'OPENQASM 2.0;'")
    if stmts[1][1] != INCLUDE[:-1]:
        raise QasmError('second statement must be include "qelib1.inc"')
    mq, mc = _RE_QREG.match(stmts[2][1]), _RE_CREG.match(stmts[3][1])
    if not mq or not mc:
        raise QasmError("expected one qreg q[...] followed by one creg c[...]")
    prog = QasmProgram(int(mq.group(1)), int(mc.group(1)))

    def check_q(q: int, lineno: int) -> int:
        if not 0 <= q < prog.n_qubits:
            raise QasmError(f"line {lineno}: qubit {q} out of range")
        return q

    for lineno, s in stmts[4:]:
        if (m := _RE_MEASURE.match(s)):
            q, c = check_q(int(m.group(1)), lineno), int(m.group(2))
            if not 0 <= c < prog.n_clbits:
                raise QasmError(f"line {lineno}: clbit {c} out of range")
            prog.measures.append((q, c))
            continue
        if prog.measures:
            raise QasmError(f"line {lineno}: operation after measurement")
        if (m := _RE_BARRIER.match(s)):
            qs = tuple(check_q(int(x), lineno) for x in re.findall(r"\[(\d+)\]", m.group(1)))
            prog.ops.append(("barrier", qs))
        elif (m := _RE_GATE.match(s)):
            name = m.group(1)
            if name not in QASM_GATES:
                raise QasmError(f"line {lineno}: unsupported gate {name!r}")
            qs = tuple(check_q(int(x), lineno) for x in m.groups()[1:] if x is not None)
            if len(qs) != (2 if name == "cx" else 1) or len(set(qs)) != len(qs):
                raise QasmError(f"line {lineno}: wrong operands for {name}")
            prog.ops.append(("gate", name, qs))
        else:
            raise QasmError(f"line {lineno}: cannot parse {s!r}")
    clbits = [c for _, c in prog.measures]
    if sorted(clbits) != list(range(prog.n_clbits)):
        raise QasmError("every classical bit must be measured exactly once")
    return prog


def validate_program(prog: QasmProgram, topo: DeviceTopology = DEFAULT_TOPOLOGY) -> None:
    """Raise unless the register fits the device and every CNOT follows an edge."""
    if prog.n_qubits != topo.n_qubits:
        raise QasmError(f"expected a {topo.n_qubits}-qubit register")
    for c, t in prog.cx_edges():
        if not topo.allows(c, t):
            raise QasmError(f"CNOT q[{c}] -> q[{t}] is not a device edge")


def program_to_circuit(prog: QasmProgram, layout: Sequence[int]) -> Circuit:
    """Local circuit for simulation; ``layout[i]`` is the device qubit of local qubit ``i``."""
    local = {d: i for i, d in enumerate(layout)}
    missing = prog.used_qubits() - set(local)
    if missing:
        raise QasmError(f"program uses device qubits {sorted(missing)} outside the layout")
    circ = Circuit(len(layout))
    for op in prog.ops:
        if op[0] == "barrier":
            circ.ops.append(BARRIER)
        elif op[1] != "id":
            circ.ops.append(Gate(op[1], tuple(local[q] for q in op[2])))
    meas = sorted(prog.measures, key=lambda qc: qc[1])
    circ.measure = tuple(local[q] for q, _ in meas)
    return circ


def simulate_program(prog: QasmProgram, layout: Sequence[int], model: Union[NoiseModel, Simulator], shots: int,
                     seed) -> dict[str, int]:
    """Sampled histogram of a parsed program, keyed in circuit bit order."""
    circ = program_to_circuit(prog, layout)
    sim = model if isinstance(model, Simulator) else Simulator(model, circ.n)
    probs = outcome_probabilities(sim.run(circ.ops), circ.measure, sim.model.measurement)
    counts = sample_counts(probs, shots, np.random.default_rng(seed))
    k = len(circ.measure)
    return {format(i, f"0{k}b"): int(c) for i, c in enumerate(counts) if c}


# --- export -----------------------------------------------------------------

MANIFEST = "manifest.json"


def _stem(run_type: str, m: int, rep: int) -> str:
    return f"{run_type}_m{m:03d}_r{rep:02d}"


def export_qasm(config, out_dir: Union[str, Path], topo: DeviceTopology = DEFAULT_TOPOLOGY) -> list[dict]:
    """Write one program per sequence plus ``manifest.json``; returns the manifest entries.

    Sequences are drawn with the same per-cell seeds as the simulator, so a
    given config exports exactly the circuits that :func:`run_experiment` runs.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for rt in config.run_types:
        rb = config.rb_config(rt)
        for m in rb.lengths:
            for rep in range(rb.sequences_per_length):
                seq_seed, shot_seed = sequence_seeds(rb.seed, rt, m, rep)
                seq = sample_sequence(m, rt, np.random.default_rng(seq_seed))
                realized = realize_physical(seq, rb.prep_mode)
                layout = topo.layout(platform_of(rt), realized.ancilla)
                text = circuit_to_qasm(realized.circuit, layout, topo)
                name = _stem(rt, m, rep) + ".qasm"
                (out / name).write_text(text)
                entries.append({"file": name, "run_type": rt, "m": m, "replicate": rep,
                                "compiled_pauli": seq.compiled_pauli, "target": list(seq.target),
                                "ancilla": realized.ancilla, "layout": list(layout),
                                "shots": rb.shots, "shot_seed": shot_seed})
    manifest = {"format": "rb422-qasm-manifest", "version": 1, "bit_order": config.bit_order,
                "sequences": entries}
    (out / MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return entries


def load_manifest(path: Union[str, Path]) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST
    data = json.loads(path.read_text())
    if data.get("format") != "rb422-qasm-manifest":
        raise IngestError(f"{path} is not an export manifest")
    return data


# --- counts -----------------------------------------------------------------

def _reorder(bits: str, bit_order: str) -> str:
    if bit_order == "circuit":
        return bits
    if bit_order == "device":
        return bits[::-1]
    raise ValueError(f"unknown bit order {bit_order!r}")


def write_counts(path: Union[str, Path], hist: dict[str, int], bit_order: str = "circuit") -> None:
    lines = [f"{_reorder(k, bit_order)} {v}" for k, v in sorted(hist.items())]
    Path(path).write_text("\n".join(lines) + "\n")


def read_counts(path: Union[str, Path], bit_order: str = "circuit") -> dict[str, int]:
    """Histogram from a count file, returned in circuit bit order."""
    out: dict[str, int] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(":", " ").split()
        if len(parts) != 2 or set(parts[0]) - {"0", "1"} or not parts[1].isdigit():
            raise IngestError(f"{path}:{lineno}: expected 'bitstring count'")
        key = _reorder(parts[0], bit_order)
        out[key] = out.get(key, 0) + int(parts[1])
    return out


def histogram_array(hist: dict[str, int], k: int) -> np.ndarray:
    counts = np.zeros(1 << k, dtype=np.int64)
    for bits, c in hist.items():
        if len(bits) != k:
            raise IngestError(f"bit string {bits!r} should have {k} bits")
        counts[int(bits, 2)] += c
    return counts


@dataclass
class IngestResult:
    records: list[SurvivalRecord]
    shot_mismatches: list[str] = field(default_factory=list)


def ingest_counts(count_dir: Union[str, Path], manifest: Union[str, Path, dict, None] = None,
                  bit_order: Optional[str] = None) -> IngestResult:
    """Score ``<stem>.counts`` files against the export manifest.

    Missing files are errors; totals that differ from the exported shot
    count are accepted but listed in ``shot_mismatches``.
    """
    count_dir = Path(count_dir)
    if isinstance(manifest, dict):
        man = manifest
    else:
        man = load_manifest(count_dir if manifest is None else manifest)
    order = bit_order or man.get("bit_order", "circuit")
    records, mismatches = [], []
    for e in man["sequences"]:
        path = count_dir / (Path(e["file"]).stem + ".counts")
        if not path.exists():
            raise IngestError(f"missing counts for sequence {e['file']}")
        platform = platform_of(e["run_type"])
        k = 2 if platform == code.BARE else 4 + int(e["ancilla"])
        counts = histogram_array(read_counts(path, order), k)
        total, acc, succ, prej, arej = classify_counts(counts, platform, tuple(e["target"]), e["ancilla"])
        if total != e["shots"]:
            mismatches.append(e["file"])
        records.append(SurvivalRecord(e["run_type"], e["m"], e["replicate"], e["compiled_pauli"], total, acc,
                                      succ, prej, arej, e.get("shot_seed", 0)))
    return IngestResult(records, mismatches)


def simulate_exported(qasm_dir: Union[str, Path], model_for, count_dir: Union[str, Path, None] = None,
                      bit_order: Optional[str] = None, topo: DeviceTopology = DEFAULT_TOPOLOGY) -> Path:
    """Stand-in for hardware: parse, validate and simulate every exported program.

    ``model_for(platform)`` returns the noise model. Counts are sampled with
    each sequence's own shot seed and written next to the programs (or to
    ``count_dir``).
    """
    qasm_dir = Path(qasm_dir)
    count_dir = Path(count_dir) if count_dir is not None else qasm_dir
    count_dir.mkdir(parents=True, exist_ok=True)
    man = load_manifest(qasm_dir)
    order = bit_order or man.get("bit_order", "circuit")
    sims: dict = {}
    for e in man["sequences"]:
        prog = parse_qasm((qasm_dir / e["file"]).read_text())
        validate_program(prog, topo)
        platform = platform_of(e["run_type"])
        key = (platform, len(e["layout"]))
        if key not in sims:
            sims[key] = Simulator(model_for(platform), len(e["layout"]))
        hist = simulate_program(prog, e["layout"], sims[key], e["shots"], e["shot_seed"])
        write_counts(count_dir / (Path(e["file"]).stem + ".counts"), hist, order)
    if count_dir != qasm_dir:
        (count_dir / MANIFEST).write_text((qasm_dir / MANIFEST).read_text())
    return count_dir
