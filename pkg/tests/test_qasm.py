import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rb422 import code
from rb422.circuit import Circuit, Gate
from rb422.clifford import equal_up_to_phase, gate_unitary
from rb422.config import ExperimentConfig
from rb422.experiment import simulate
from rb422.qasm import (DEFAULT_TOPOLOGY, MANIFEST, IngestError, QasmError, RoutingError, circuit_to_qasm,
                        export_qasm, ingest_counts, load_manifest, parse_qasm, read_counts, route_cx,
                        simulate_exported, simulate_program, validate_program, write_counts)
from rb422.simulator import NOISELESS

TOPO = DEFAULT_TOPOLOGY


def test_device_edges():
    for e in [(12, 5), (12, 13), (13, 14), (15, 14), (13, 4)]:
        assert TOPO.allows(*e)
    for e in [(5, 12), (13, 12), (14, 13), (14, 15)]:
        assert not TOPO.allows(*e)
    assert len(TOPO.edges) == 22
    assert TOPO.layout(code.LOGICAL) == (5, 12, 13, 14)
    assert TOPO.layout(code.LOGICAL, ancilla=True) == (5, 12, 13, 14, 4)
    assert TOPO.layout(code.BARE) == (12, 5)


def test_reversed_cnot_gets_hadamards():
    assert route_cx(5, 12, TOPO) == [("h", (5,)), ("h", (12,)), ("cx", (12, 5)), ("h", (5,)), ("h", (12,))]
    assert route_cx(12, 5, TOPO) == [("cx", (12, 5))]
    with pytest.raises(RoutingError):
        route_cx(3, 3, TOPO)


def routed_unitary(ops, qubits):
    local = {q: i for i, q in enumerate(qubits)}
    u = np.eye(1 << len(qubits), dtype=complex)
    for name, qs in ops:
        u = gate_unitary(name, [local[q] for q in qs], len(qubits)) @ u
    return u


@given(st.integers(0, 15), st.integers(0, 15))
def test_routed_cnot_is_cnot(c, t):
    # [DERIVED] any routing (direct, reversed or bridged) must equal CNOT on the two endpoints
    if c == t:
        return
    ops = route_cx(c, t, TOPO)
    assert all(TOPO.allows(*qs) for name, qs in ops if name == "cx")
    qubits = sorted({q for _, qs in ops for q in qs})
    ref = gate_unitary("cx", [qubits.index(c), qubits.index(t)], len(qubits))
    assert equal_up_to_phase(routed_unitary(ops, qubits), ref)


def test_bridge_time_order():
    ops = route_cx(14, 4, TOPO, prefer=(5, 12, 13, 14, 4))
    cx = [qs for n, qs in ops if n == "cx"]
    assert cx == [(13, 14), (13, 4), (13, 14), (13, 4)]


def test_parser_accepts_own_output():
    circ = Circuit(2, [Gate("h", (0,)), Gate("cx", (0, 1)), Gate("sdg", (1,))], measure=(0, 1))
    prog = parse_qasm(circuit_to_qasm(circ, (12, 5)))
    validate_program(prog)
    assert prog.measures == [(12, 0), (5, 1)]
    assert prog.cx_edges() == [(12, 5)]


BASE = 'OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[16];\ncreg c[1];\n'


@pytest.mark.parametrize("body", [
    "t q[0];\nmeasure q[0] -> c[0];",
    "x q[16];\nmeasure q[0] -> c[0];",
    "x q[0]\nmeasure q[0] -> c[0];",
    "measure q[0] -> c[0];\nx q[0];",
    "cx q[0],q[0];\nmeasure q[0] -> c[0];",
    "x q[0];",
    "measure q[0] -> c[3];",
    "x q[0], q[1];\nmeasure q[0] -> c[0];",
])
def test_parser_rejects(body):
    with pytest.raises(QasmError):
        parse_qasm(BASE + body)


def test_parser_header_required():
    with pytest.raises(QasmError):
        parse_qasm("qreg q[16];\ncreg c[1];\nmeasure q[0] -> c[0];")
    with pytest.raises(QasmError):
        parse_qasm('OPENQASM 2.0;\ninclude "other.inc";\nqreg q[16];\ncreg c[1];\nmeasure q[0] -> c[0];')


def test_validate_rejects_wrong_edges():
    prog = parse_qasm(BASE + "cx q[5],q[12];\nmeasure q[5] -> c[0];")
    with pytest.raises(QasmError):
        validate_program(prog)


def test_identity_sequence_round_trip():
    # [DERIVED] a noiseless program that prepares a codeword reads back the codeword only
    circ = Circuit(4, list(code.prepare_logical_00(code.PLAIN).gates), measure=(0, 1, 2, 3))
    prog = parse_qasm(circuit_to_qasm(circ, TOPO.layout(code.LOGICAL)))
    validate_program(prog)
    hist = simulate_program(prog, TOPO.layout(code.LOGICAL), NOISELESS, 1000, 3)
    assert set(hist) <= {"0000", "1111"} and sum(hist.values()) == 1000


@pytest.fixture(scope="module")
def small_config():
    return ExperimentConfig(lengths=(1, 4), sequences_per_length=2, shots=64, seed=2,
                            noise={"element_depolarizing": 0.05, "measurement_flip": 0.02},
                            prep_mode=code.FAULT_TOLERANT)


def test_export_validates(tmp_path, small_config):
    entries = export_qasm(small_config, tmp_path)
    assert len(entries) == 4 * 2 * 2
    for e in entries:
        prog = parse_qasm((tmp_path / e["file"]).read_text())
        validate_program(prog)
        assert prog.used_qubits() <= set(e["layout"]) | set(TOPO.data) | {TOPO.ancilla}
    ft = [e for e in entries if e["run_type"].startswith("logical")]
    assert all(e["ancilla"] and e["layout"][-1] == 4 for e in ft)
    assert load_manifest(tmp_path)["bit_order"] == "circuit"


def test_round_trip_matches_direct_simulation(tmp_path, small_config):
    export_qasm(small_config, tmp_path)
    simulate_exported(tmp_path, small_config.model)
    res = ingest_counts(tmp_path)
    assert res.shot_mismatches == []
    direct = simulate(small_config)
    got = {}
    for r in res.records:
        got.setdefault(r.run_type, []).append(r)
    assert got == direct


def test_device_bit_order(tmp_path, small_config):
    cfg = small_config.with_overrides(bit_order="device", run_types=("physical_standard",))
    export_qasm(cfg, tmp_path / "q")
    simulate_exported(tmp_path / "q", cfg.model, tmp_path / "c")
    a = ingest_counts(tmp_path / "c").records
    assert a == simulate(cfg)["physical_standard"]
    assert ingest_counts(tmp_path / "c", bit_order="circuit").records != a
    with pytest.raises(IngestError):
        ingest_counts(tmp_path / "q", tmp_path / "c")


def test_count_file_bit_order(tmp_path):
    write_counts(tmp_path / "a.counts", {"1000": 3, "0001": 5}, bit_order="device")
    assert (tmp_path / "a.counts").read_text().split("\n")[0] == "1000 5"
    assert read_counts(tmp_path / "a.counts", "device") == {"1000": 3, "0001": 5}
    (tmp_path / "b.counts").write_text("10x1 4\n")
    with pytest.raises(IngestError):
        read_counts(tmp_path / "b.counts")


def manifest_for(tmp_path, shots=1024):
    man = {"format": "rb422-qasm-manifest", "version": 1, "bit_order": "circuit",
           "sequences": [{"file": "s.qasm", "run_type": "logical_standard", "m": 2, "replicate": 0,
                          "compiled_pauli": 0, "target": [0, 0], "ancilla": False, "layout": [5, 12, 13, 14],
                          "shots": shots, "shot_seed": 0}]}
    (tmp_path / MANIFEST).write_text(json.dumps(man))
    return man


def test_ingest_examples(tmp_path):
    manifest_for(tmp_path)
    (tmp_path / "s.counts").write_text("0000 1024\n")
    r = ingest_counts(tmp_path).records[0]
    assert (r.accepted_shots, r.successes) == (1024, 1024)
    (tmp_path / "s.counts").write_text("1000 100\n0000 924\n")
    r = ingest_counts(tmp_path).records[0]
    assert (r.accepted_shots, r.successes, r.parity_rejected) == (924, 924, 100)
    assert 1 - r.accepted_shots / r.total_shots == pytest.approx(100 / 1024)


def test_ingest_shot_mismatch_and_missing(tmp_path):
    manifest_for(tmp_path)
    (tmp_path / "s.counts").write_text("0000 1000\n")
    assert ingest_counts(tmp_path).shot_mismatches == ["s.qasm"]
    (tmp_path / "s.counts").unlink()
    with pytest.raises(IngestError):
        ingest_counts(tmp_path)
    (tmp_path / "s.counts").write_text("000 5\n")
    with pytest.raises(IngestError):
        ingest_counts(tmp_path)
