import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlock.benchmarks import load_benchmark
from qlock.circuit import Circuit, Measure, circuit, gate
from qlock.simulator import (
    NOISELESS,
    Distribution,
    InvalidShots,
    NoiseModel,
    NoMeasurement,
    TooManyQubits,
    equivalent_up_to_phase,
    ideal_outcome,
    outcome_probabilities,
    run_statevector,
    sample,
    unitary_of,
)

from oracles import CLASSICAL, classical_eval, phase_distance, random_circuit, reference_unitary


def measured(c: Circuit) -> Circuit:
    n = c.n_qubits
    return c.replace(n_clbits=n, instructions=c.instructions + tuple(Measure(q, q) for q in range(n)))


# -- statevector -------------------------------------------------------------

def test_hadamard_amplitudes():
    amps = run_statevector(circuit(1, gate("h", 0)), "0").amplitudes
    assert np.allclose(amps, [1 / math.sqrt(2), 1 / math.sqrt(2)])


def test_empty_circuit_keeps_basis_state():
    amps = run_statevector(Circuit(2), "10").amplitudes
    expected = np.zeros(4)
    expected[1] = 1  # qubit 0 is the low bit
    assert np.allclose(amps, expected)


def test_xx_returns_to_zero():
    assert np.allclose(run_statevector(circuit(1, gate("x", 0), gate("x", 0)), "0").amplitudes, [1, 0])


def test_input_length_checked():
    with pytest.raises(ValueError):
        run_statevector(Circuit(2), "1")
    with pytest.raises(ValueError):
        run_statevector(Circuit(1), "2")


@given(st.integers(1, 6), st.integers(0, 40), st.integers(0, 2**32 - 1))
def test_norm_preserved(n, g, seed):
    c = random_circuit(random.Random(seed), n, g)
    assert abs(run_statevector(c).norm() - 1) < 1e-10


# -- unitary -----------------------------------------------------------------

def test_unitary_of_x():
    assert np.allclose(unitary_of(circuit(1, gate("x", 0))), [[0, 1], [1, 0]])


def test_unitary_of_empty_is_identity():
    assert np.allclose(unitary_of(Circuit(3)), np.eye(8))


def test_cx_is_basis_permutation():
    u = unitary_of(circuit(2, gate("cx", 0, 1)))
    # little-endian index = q0 + 2*q1: control q0 set maps 1 <-> 3
    expected = np.zeros((4, 4))
    for src, dst in {0: 0, 1: 3, 2: 2, 3: 1}.items():
        expected[dst, src] = 1
    assert np.allclose(u, expected)


@given(st.integers(1, 4), st.integers(0, 15), st.integers(0, 2**32 - 1))
def test_unitary_matches_kron_oracle(n, g, seed):
    c = random_circuit(random.Random(seed), n, g)
    assert np.max(np.abs(unitary_of(c) - reference_unitary(c))) < 1e-10


def test_unitary_limits():
    with pytest.raises(TooManyQubits):
        unitary_of(Circuit(11))


def test_equivalence_examples():
    x = circuit(1, gate("x", 0))
    conj = circuit(1, gate("h", 0), gate("rz", 0, param=math.pi), gate("h", 0))  # H Z H = X
    assert equivalent_up_to_phase(x, x)
    assert equivalent_up_to_phase(x, conj)
    assert not equivalent_up_to_phase(x, circuit(1, gate("h", 0)))


def test_phase_distance_agrees_with_oracle():
    rng = random.Random(3)
    for _ in range(20):
        c = random_circuit(rng, 3, 10)
        u = unitary_of(c)
        assert phase_distance(u * np.exp(0.7j), u) < 1e-12


# -- sampling ----------------------------------------------------------------

def test_adder_zero_input_noiseless():
    b = load_benchmark("adder_1bit")
    d = sample(b.circuit, b.input, 10_000, NOISELESS, seed=0)
    assert d.counts == {"00": 10_000}


def test_x_then_measure():
    d = sample(circuit(1, gate("x", 0), Measure(0, 0), n_clbits=1), None, 1000, NOISELESS)
    assert d.counts == {"1": 1000}


def test_hadamard_statistics_within_three_sigma():
    shots = 10_000
    d = sample(circuit(1, gate("h", 0), Measure(0, 0), n_clbits=1), None, shots, NOISELESS, seed=11)
    sigma = math.sqrt(shots * 0.25)
    assert set(d.counts) == {"0", "1"}
    assert abs(d["0"] - shots / 2) <= 3 * sigma


def test_outcome_key_orders_clbits():
    c = circuit(3, gate("x", 2), Measure(2, 0), Measure(0, 1), n_clbits=2)
    assert sample(c, None, 10, NOISELESS).counts == {"10": 10}


@pytest.mark.parametrize("seed", range(4))
def test_classical_and_statevector_paths_agree(seed):
    c = measured(random_circuit(random.Random(seed), 4, 25, kinds=CLASSICAL))
    noise = NoiseModel(0.01, 0.05, 0.02)
    a = sample(c, "1010", 3000, noise, seed=seed, method="classical")
    b = sample(c, "1010", 3000, noise, seed=seed, method="statevector")
    assert a == b


def test_classical_evaluator_oracle_on_random_circuits():
    rng = random.Random(2024)
    for _ in range(1000):
        n = rng.randint(1, 6)
        c = random_circuit(rng, n, rng.randint(0, 20), kinds=CLASSICAL, measure=True)
        bits = "".join(rng.choice("01") for _ in range(n))
        assert ideal_outcome(c, bits) == classical_eval(c, bits)


@pytest.mark.parametrize("seed", range(5))
def test_sampled_noiseless_matches_classical_oracle(seed):
    rng = random.Random(seed)
    c = random_circuit(rng, 5, 30, kinds=CLASSICAL, measure=True)
    bits = "".join(rng.choice("01") for _ in range(5))
    d = sample(c, bits, 200, NOISELESS, seed=seed, method="statevector")
    assert d.counts == {classical_eval(c, bits): 200}


def test_sampling_is_deterministic_per_seed():
    c = load_benchmark("rd53").circuit
    noise = NoiseModel(0.01, 0.02, 0.02)
    assert sample(c, None, 2000, noise, seed=4) == sample(c, None, 2000, noise, seed=4)
    assert sample(c, None, 2000, noise, seed=4) != sample(c, None, 2000, noise, seed=5)


def _binomial_ok(count: int, shots: int, p: float) -> bool:
    return abs(count - shots * p) <= 4 * math.sqrt(shots * p * (1 - p))


def test_readout_flip_rate():
    shots = 20_000
    d = sample(circuit(1, Measure(0, 0), n_clbits=1), None, shots, NoiseModel(0, 0, 0.1), seed=1)
    assert _binomial_ok(d["1"], shots, 0.1)


def test_single_qubit_error_rate():
    shots = 20_000
    d = sample(circuit(1, gate("x", 0), Measure(0, 0), n_clbits=1), None, shots, NoiseModel(0.1, 0, 0), seed=2)
    assert _binomial_ok(d["0"], shots, 0.1)  # only the X error shows up


def test_two_qubit_depolarizing_rate():
    shots = 20_000
    c = circuit(2, gate("cx", 0, 1), Measure(0, 0), Measure(1, 1), n_clbits=2)
    d = sample(c, None, shots, NoiseModel(0, 0.4, 0), seed=3)
    flip0 = d["10"] + d["11"]
    flip1 = d["01"] + d["11"]
    for k in (flip0, flip1):
        assert _binomial_ok(k, shots, 0.2)  # X or Y out of four Paulis


def test_noise_on_superposition_statevector_path():
    c = circuit(2, gate("h", 0), gate("cx", 0, 1), gate("cx", 0, 1), gate("h", 0), Measure(0, 0), Measure(1, 1), n_clbits=2)
    assert sample(c, None, 500, NOISELESS).counts == {"00": 500}
    noisy = sample(c, None, 5000, NoiseModel(0.02, 0.05, 0), seed=9)
    assert 0.8 < noisy["00"] / 5000 < 0.99


def test_sampling_errors():
    with pytest.raises(NoMeasurement):
        sample(circuit(1, gate("x", 0)), None, 10)
    with pytest.raises(InvalidShots):
        sample(circuit(1, Measure(0, 0), n_clbits=1), None, 0)
    with pytest.raises(InvalidShots):
        sample(circuit(1, Measure(0, 0), n_clbits=1), None, 2.5)


def test_outcome_probabilities_exact():
    c = circuit(2, gate("h", 0), gate("cx", 0, 1), Measure(0, 0), Measure(1, 1), n_clbits=2)
    p = outcome_probabilities(c)
    assert p.keys() == {"00", "11"} and all(abs(v - 0.5) < 1e-12 for v in p.values())


def test_distribution_validation_and_json():
    d = Distribution({"01": 3, "10": 1}, 4)
    assert Distribution.from_json(d.to_json()) == d
    assert d.most_common() == "01"
    with pytest.raises(ValueError):
        Distribution({"0": 3}, 4)
    with pytest.raises(ValueError):
        Distribution({"0": 1, "10": 1}, 2)


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_noiseless_sample_follows_exact_probabilities(seed):
    rng = random.Random(seed)
    c = measured(random_circuit(rng, 3, 8))
    probs = outcome_probabilities(c)
    d = sample(c, None, 4000, NOISELESS, seed=seed)
    for k, p in probs.items():
        assert abs(d[k] / 4000 - p) < 5 * math.sqrt(p * (1 - p) / 4000) + 1e-9
    assert set(d.counts) <= set(probs)
