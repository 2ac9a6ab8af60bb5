"""The compiled kernels must agree with the numpy ones bit for bit (up to rounding)."""
import random

import numpy as np
import pytest

from qlock import _backend, _pykernels
from qlock.benchmarks import load_benchmark
from qlock.compiler import compile
from qlock.simulator import NoiseModel, sample, unitary_of

from oracles import random_circuit

try:
    from qlock import _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None

needs_c = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def _state(n, batch, seed):
    rng = np.random.default_rng(seed)
    s = rng.normal(size=(1 << n, batch)) + 1j * rng.normal(size=(1 << n, batch))
    return np.ascontiguousarray(s)


@needs_c
@pytest.mark.parametrize("q", range(5))
@pytest.mark.parametrize("batch", [1, 3])
def test_apply_1q_agrees(q, batch):
    a, b = _state(5, batch, q), _state(5, batch, q)
    m = (0.3 + 0.1j, -0.2j, 0.5, 0.7 - 0.4j)
    _pykernels.apply_1q(a, q, *m)
    _ckernels.apply_1q(b, q, *m)
    assert np.allclose(a, b, atol=1e-13)


@needs_c
@pytest.mark.parametrize("q", range(4))
def test_apply_diag_agrees(q):
    a, b = _state(4, 2, 7), _state(4, 2, 7)
    _pykernels.apply_diag(a, q, 1.0 + 0j, np.exp(0.4j))
    _ckernels.apply_diag(b, q, 1.0 + 0j, np.exp(0.4j))
    assert np.allclose(a, b, atol=1e-13)


@needs_c
@pytest.mark.parametrize("mask, target", [(0, 2), (0b1, 3), (0b1010, 0), (0b0111, 4)])
def test_apply_mcx_agrees(mask, target):
    a, b = _state(5, 2, 1), _state(5, 2, 1)
    _pykernels.apply_mcx(a, mask, target)
    _ckernels.apply_mcx(b, mask, target)
    assert np.array_equal(a, b)


@needs_c
@pytest.mark.parametrize("x, y", [(0, 1), (3, 1), (0, 4)])
def test_apply_swap_agrees(x, y):
    a, b = _state(5, 1, 2), _state(5, 1, 2)
    _pykernels.apply_swap(a, x, y)
    _ckernels.apply_swap(b, x, y)
    assert np.array_equal(a, b)


@needs_c
@pytest.mark.parametrize("seed", range(10))
def test_unitaries_agree(seed):
    c = random_circuit(random.Random(seed), 4, 30)
    assert np.allclose(unitary_of(c, backend="python"), unitary_of(c, backend="cython"), atol=1e-12)


@needs_c
@pytest.mark.parametrize("name", ["adder_1bit", "rd53", "big12"])
def test_classical_sampling_identical(name):
    c = load_benchmark(name).circuit
    noise = NoiseModel(0.01, 0.02, 0.01)
    assert sample(c, None, 3000, noise, seed=5, backend="python") == sample(c, None, 3000, noise, seed=5, backend="cython")


@needs_c
def test_statevector_sampling_identical():
    cc = compile(load_benchmark("mini_alu").circuit).circuit
    noise = NoiseModel(0.001, 0.01, 0.01)
    assert sample(cc, None, 2000, noise, seed=8, backend="python") == sample(cc, None, 2000, noise, seed=8, backend="cython")


def test_backend_selection():
    assert _backend.get("python") is _pykernels
    assert _backend.name in ("python", "cython")
    with pytest.raises(ValueError):
        _backend.get("fortran")
