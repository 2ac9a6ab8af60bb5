import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qlock.benchmarks import load_benchmark
from qlock.circuit import (
    Barrier,
    Circuit,
    Gate,
    GateKind,
    Measure,
    MeasurementPresent,
    QubitCountMismatch,
    TooFewGates,
    circuit,
    concat,
    gate,
    inverse,
    is_valid,
    remap,
    split_at_midpoint,
    validate,
)
from qlock.simulator import NOISELESS, sample

from oracles import phase_distance, random_circuit, reference_unitary

X, H, T, CX, C3X = GateKind.X, GateKind.H, GateKind.T, GateKind.CX, GateKind.C3X


def test_well_formed_circuit_has_no_violations():
    c = circuit(2, gate("x", 0), gate("cx", 0, 1), Measure(0, 0), Measure(1, 1), n_clbits=2)
    assert validate(c) == []
    assert is_valid(c)


def test_duplicate_qubit_reported():
    problems = validate(circuit(2, gate("cx", 0, 0)))
    assert any("duplicate qubit at instruction 0" in p for p in problems)


def test_out_of_range_qubit_reported():
    problems = validate(circuit(3, gate("x", 5)))
    assert any("qubit index out of range" in p for p in problems)


@pytest.mark.parametrize(
    "c, fragment",
    [
        (circuit(2, Gate(CX, (0,))), "arity mismatch"),
        (circuit(1, Gate(GateKind.RZ, (0,))), "parameter mismatch"),
        (circuit(1, Gate(X, (0,), 0.5)), "parameter mismatch"),
        (circuit(1, Gate(GateKind.RZ, (0,), float("nan"))), "non-finite angle"),
        (circuit(1, Measure(0, 0), n_clbits=0), "clbit index out of range"),
        (circuit(1, Measure(0, 0), gate("x", 0), n_clbits=1), "gate after measurement"),
    ],
)
def test_validate_catches(c, fragment):
    assert any(fragment in p for p in validate(c))


def test_inverse_reverses_order_and_adjoints():
    c = circuit(2, gate("h", 0), gate("cx", 0, 1))
    assert inverse(c).instructions == (gate("cx", 0, 1), gate("h", 0))
    assert inverse(circuit(1, gate("t", 0))).instructions == (gate("tdg", 0),)


def test_inverse_of_self_inverse_block():
    c = circuit(5, gate("x", 4), gate("c3x", 0, 1, 2, 3), gate("x", 1))
    assert inverse(c).instructions == (gate("x", 1), gate("c3x", 0, 1, 2, 3), gate("x", 4))


def test_inverse_negates_rz_and_keeps_barriers():
    c = circuit(2, gate("rz", 0, param=0.3), Barrier({0, 1}, "b"), gate("sx", 1))
    inv = inverse(c)
    assert inv.instructions == (gate("sxdg", 1), Barrier({0, 1}, "b"), gate("rz", 0, param=-0.3))


def test_inverse_rejects_measurements():
    with pytest.raises(MeasurementPresent):
        inverse(circuit(1, gate("x", 0), Measure(0, 0), n_clbits=1))


def test_concat_identity_and_errors():
    c = circuit(3, gate("h", 0), gate("ccx", 0, 1, 2))
    assert concat(Circuit(3), c) == c
    with pytest.raises(QubitCountMismatch):
        concat(Circuit(2), c)
    with pytest.raises(MeasurementPresent):
        concat(circuit(3, Measure(0, 0), n_clbits=1), c)


def test_concat_with_inverse_returns_to_zero():
    rng = random.Random(5)
    c = random_circuit(rng, 3, 12)
    full = concat(concat(c, inverse(c)), circuit(3, *[Measure(q, q) for q in range(3)], n_clbits=3))
    d = sample(full, None, 500, NOISELESS, seed=1)
    assert d.counts == {"000": 500}


def test_concat_xx_is_identity():
    d = sample(concat(circuit(1, gate("x", 0)), circuit(1, gate("x", 0), Measure(0, 0), n_clbits=1)), None, 100, NOISELESS, seed=0)
    assert d.counts == {"0": 100}


def _gate_counts(left, right):
    return left.gate_count(), right.gate_count()


def test_split_adder_evenly():
    left, right, _ = split_at_midpoint(load_benchmark("adder_1bit").circuit)
    assert _gate_counts(left, right) == (10, 10)


@pytest.mark.parametrize("n, expected", [(2, (1, 1)), (5, (2, 3)), (8, (4, 4))])
def test_split_floor_rule(n, expected):
    c = circuit(2, *[gate("x", i % 2) for i in range(n)])
    left, right, _ = split_at_midpoint(c)
    assert _gate_counts(left, right) == expected


def test_split_keeps_measures_right_and_needs_two_gates():
    c = circuit(2, gate("x", 0), gate("x", 1), Measure(0, 0), n_clbits=1)
    left, right, _ = split_at_midpoint(c)
    assert not left.measures and right.measures == [Measure(0, 0)]
    with pytest.raises(TooFewGates):
        split_at_midpoint(circuit(1, gate("x", 0)))


def test_remap_relabels_every_instruction():
    c = circuit(3, gate("cx", 0, 2), Barrier({0, 1}), Measure(2, 0), n_clbits=1)
    r = remap(c, [2, 0, 1])
    assert r.instructions == (gate("cx", 2, 1), Barrier({2, 0}), Measure(1, 0))


def test_metadata_ignored_by_equality():
    a = circuit(1, gate("x", 0), id="a")
    b = circuit(1, gate("x", 0), id="b")
    assert a == b and a.metadata != b.metadata


@st.composite
def circuits(draw, max_qubits=4, max_gates=12):
    n = draw(st.integers(1, max_qubits))
    seed = draw(st.integers(0, 2**32 - 1))
    g = draw(st.integers(0, max_gates))
    return random_circuit(random.Random(seed), n, g)


@given(circuits())
def test_double_inverse_is_identity(c):
    assert inverse(inverse(c)) == c


@given(circuits())
def test_inverse_undoes_unitary(c):
    u = reference_unitary(c)
    v = reference_unitary(inverse(c))
    assert phase_distance(v @ u, np.eye(1 << c.n_qubits)) < 1e-9


@given(circuits(), circuits())
def test_concat_gate_count_adds(a, b):
    b = b.replace(n_qubits=max(a.n_qubits, b.n_qubits))
    a = a.replace(n_qubits=b.n_qubits)
    assert concat(a, b).gate_count() == a.gate_count() + b.gate_count()


@given(circuits(max_gates=20))
def test_split_partitions_gates(c):
    if c.gate_count() < 2:
        return
    left, right, idx = split_at_midpoint(c)
    assert left.instructions + right.instructions == c.instructions
    assert left.gate_count() == c.gate_count() // 2
