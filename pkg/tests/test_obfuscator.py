import warnings

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qlock.benchmarks import NAMES, load_benchmark, restore_logical
from qlock.circuit import Barrier, Circuit, GateKind, Measure, circuit, gate
from qlock.metrics import dfc, tvd
from qlock.obfuscator import (
    BACK,
    FRONT,
    ID_KEY,
    LOCATIONS,
    MIDDLE,
    InfeasibleArity,
    InsertionLocation,
    InvalidParams,
    QubitMismatch,
    RandomBlockParams,
    StealthWarning,
    generate_block,
    insert,
    obfuscate,
)
from qlock.simulator import NOISELESS, ideal_outcome, sample

from oracles import classical_eval


def test_single_forced_gate():
    block = generate_block(RandomBlockParams(1, {GateKind.X}, tuple(range(5)), seed=7), 5)
    assert len(block.gates) == 1
    g = block.gates[0]
    assert g.kind is GateKind.X and g.qubits[0] in range(5)


@pytest.mark.parametrize("seed", range(30))
def test_refined_block_flips_measured_qubit_once(seed):
    p = RandomBlockParams(3, {GateKind.X, GateKind.CX, GateKind.CCX}, tuple(range(5)), True, seed, (3, 4))
    block = generate_block(p, 5)
    first, *rest = block.gates
    assert first.kind is GateKind.X and first.qubits[0] in (3, 4)
    assert all(first.qubits[0] not in g.qubits for g in rest)


def test_infeasible_arity():
    with pytest.raises(InfeasibleArity):
        generate_block(RandomBlockParams(2, {GateKind.C3X}, (0, 1, 2), seed=0), 3)


@pytest.mark.parametrize(
    "kwargs",
    [dict(n_gates=0), dict(allowed_kinds=set()), dict(qubit_pool=())],
)
def test_invalid_params(kwargs):
    with pytest.raises(InvalidParams):
        RandomBlockParams(**kwargs)


def test_refined_needs_measured_qubit_in_pool():
    with pytest.raises(InvalidParams):
        generate_block(RandomBlockParams(2, {GateKind.X}, (0, 1), True, 0, (4,)), 5)


def test_pool_outside_circuit():
    with pytest.raises(QubitMismatch):
        generate_block(RandomBlockParams(1, {GateKind.X}, (0, 7), seed=0), 5)


def test_parametric_kinds_get_angles():
    block = generate_block(RandomBlockParams(5, {GateKind.RZ}, (0, 1), seed=3), 2)
    assert all(g.param is not None and 0 <= g.param < 6.3 for g in block.gates)


@given(st.integers(0, 2**31 - 1), st.integers(1, 6), st.booleans())
def test_blocks_stay_in_pool_and_vocabulary(seed, n, refined):
    kinds = {GateKind.X, GateKind.CX, GateKind.CCX, GateKind.H}
    pool = (0, 2, 3, 5)
    block = generate_block(RandomBlockParams(n, kinds, pool, refined, seed, (2, 5)), 6)
    assert len(block.gates) == n
    assert all(g.kind in kinds and set(g.qubits) <= set(pool) for g in block.gates)


def test_back_insert_flips_adder_sum():
    adder = load_benchmark("adder_1bit")
    obf, record = insert(adder.circuit, circuit(5, gate("x", 4)), BACK)
    d_orig = sample(adder.circuit, adder.input, 1000, NOISELESS)
    d_obf = sample(obf, adder.input, 1000, NOISELESS)
    assert d_orig.counts == {"00": 1000} and d_obf.counts == {"10": 1000}
    assert dfc(d_obf, adder.correct_output) == -1.0
    assert record.location == BACK and record.insertion_index == 20


def test_front_insert_of_empty_block_changes_nothing():
    adder = load_benchmark("adder_1bit")
    obf, _ = insert(adder.circuit, Circuit(5), FRONT)
    assert obf == adder.circuit
    d = sample(adder.circuit, "11000", 500, NOISELESS)
    assert tvd(d, sample(obf, "11000", 500, NOISELESS)) == 0


def test_middle_insert_into_counter():
    counter = load_benchmark("counter").circuit
    block = circuit(4, gate("x", 0), gate("cx", 1, 2), gate("x", 3))
    obf, record = insert(counter, block, MIDDLE, split_gates=3)
    assert obf.gate_count() == 11
    tagged = [b for b in obf.barriers if b.tag]
    assert len(tagged) == 1 and tagged[0].tag == record.barrier_tag
    k = obf.instructions.index(tagged[0])
    assert sum(1 for i in obf.instructions[:k] if i in obf.gates) == 6


def test_middle_sides():
    c = circuit(2, gate("x", 0), gate("x", 1), gate("cx", 0, 1), gate("cx", 1, 0), Measure(0, 0), n_clbits=1)
    block = circuit(2, gate("h", 0))
    left, _ = insert(c, block, InsertionLocation("middle", "left"))
    right, _ = insert(c, block, InsertionLocation("middle", "right"))
    assert isinstance(left.instructions[3], Barrier) and left.instructions[2] == gate("h", 0)
    assert isinstance(right.instructions[2], Barrier) and right.instructions[3] == gate("h", 0)


def test_measures_stay_last():
    for loc in LOCATIONS:
        obf, _ = insert(load_benchmark("rd53").circuit, circuit(8, gate("x", 0)), loc)
        n_meas = len(obf.measures)
        assert all(isinstance(i, Measure) for i in obf.instructions[-n_meas:])


def test_location_parse():
    assert InsertionLocation.parse("middle-right") == InsertionLocation("middle", "right")
    assert InsertionLocation.parse("Back") == BACK
    assert str(MIDDLE) == "middle-left"
    with pytest.raises(ValueError):
        InsertionLocation.parse("sideways")
    with pytest.raises(ValueError):
        InsertionLocation("front", "left")


def test_insert_rejects_wider_block():
    with pytest.raises(QubitMismatch):
        insert(circuit(2, gate("x", 0)), Circuit(3), BACK)


def test_obfuscate_defaults():
    adder = load_benchmark("adder_1bit").circuit
    obf, record = obfuscate(adder, location=BACK)
    assert record.location == BACK and record.block.gate_count() == 3
    assert obf.metadata[ID_KEY] == record.fingerprint()


def test_obfuscate_is_deterministic():
    adder = load_benchmark("adder_1bit").circuit
    p = RandomBlockParams(seed=99)
    a, ra = obfuscate(adder, p, MIDDLE)
    b, rb = obfuscate(adder, p, MIDDLE)
    assert a == b and ra == rb and a.metadata == b.metadata


def test_stealth_warning_without_x():
    no_x = circuit(3, gate("cx", 0, 1), gate("ccx", 0, 1, 2), Measure(2, 0), n_clbits=1)
    with pytest.warns(StealthWarning):
        obfuscate(no_x, RandomBlockParams(refined=True, seed=1), BACK)


def test_no_warning_when_kinds_match():
    with warnings.catch_warnings():
        warnings.simplefilter("error", StealthWarning)
        obfuscate(load_benchmark("adder_1bit").circuit, RandomBlockParams(seed=2), BACK)


def test_fingerprint_ignores_seed_only():
    adder = load_benchmark("adder_1bit").circuit
    _, r1 = insert(adder, circuit(5, gate("x", 1)), BACK, seed=1)
    _, r2 = insert(adder, circuit(5, gate("x", 1)), BACK, seed=2)
    _, r3 = insert(adder, circuit(5, gate("x", 2)), BACK, seed=1)
    assert r1.fingerprint() == r2.fingerprint() != r3.fingerprint()


@given(st.sampled_from([n for n in NAMES if n != "big12"]), st.sampled_from(LOCATIONS), st.booleans(), st.integers(0, 2**31 - 1))
def test_restoring_recovers_function(name, loc, refined, seed):
    b = load_benchmark(name)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StealthWarning)
        obf, record = obfuscate(b.circuit, RandomBlockParams(refined=refined, seed=seed), loc)
    assert ideal_outcome(restore_logical(obf, record), b.input) == b.correct_output


@given(st.sampled_from(NAMES), st.integers(0, 2**31 - 1))
def test_refined_back_always_corrupts(name, seed):
    b = load_benchmark(name)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StealthWarning)
        obf, _ = obfuscate(b.circuit, RandomBlockParams(refined=True, seed=seed), BACK)
    out = classical_eval(obf, b.input)
    assert out != b.correct_output
