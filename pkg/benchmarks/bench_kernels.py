"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from qlock import _backend
from qlock.benchmarks import load_benchmark
from qlock.compiler import compile
from qlock.simulator import DEFAULT_NOISE, NOISELESS, sample


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases():
    rng = np.random.default_rng(0)
    n = 16
    state = (rng.normal(size=(1 << n, 1)) + 1j * rng.normal(size=(1 << n, 1))).astype(complex)
    state /= np.linalg.norm(state)
    h = 1 / np.sqrt(2)

    def one_qubit(K):
        s = state.copy()
        return lambda: [K.apply_1q(s, q, h, h, h, -h) for q in range(n)]

    def mcx(K):
        s = state.copy()
        return lambda: [K.apply_mcx(s, 0b11 << q, q + 2) for q in range(n - 2)]

    def classical(K):
        shots = 200_000
        states = np.zeros(shots, dtype=np.uint64)
        ops = np.array([[0, 0b111 << (k % 8), (k % 8) + 3] for k in range(200)], dtype=np.int64)
        ptr = np.zeros(len(ops) + 1, dtype=np.int64)
        empty_i, empty_u = np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.uint64)
        return lambda: K.classical_run(states, ops, ptr, empty_i, empty_u)

    big = load_benchmark("big12")
    adder = load_benchmark("adder_1bit")
    compiled = compile(adder.circuit)
    bits = compiled.initial_layout.physical_input(adder.input)

    def trajectories(name):
        return lambda: sample(compiled.circuit, bits, 10_000, DEFAULT_NOISE, seed=1, backend=name)

    def statevector(name):
        return lambda: sample(compile(big.circuit).circuit, None, 1000, NOISELESS, seed=1, backend=name)

    return [
        ("apply_1q, 16 qubits x 16", one_qubit, False),
        ("apply_mcx, 16 qubits x 14", mcx, False),
        ("classical_run, 200k shots x 200 ops", classical, False),
        ("noisy compiled adder, 10k shots", trajectories, True),
        ("noiseless compiled big12", statevector, True),
    ]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    try:
        ck = _backend.get("cython")
    except ImportError:
        print("compiled extension not built; only the numpy kernels are available")
        ck = None
    backends = [("python", _backend.get("python"))] + ([("cython", ck)] if ck else [])
    print(f"{'case':40s}" + "".join(f"{n:>12s}" for n, _ in backends) + ("     speedup" if ck else ""))
    for label, make, by_name in cases():
        times = [best_of(make(name if by_name else K), args.repeat) for name, K in backends]
        row = f"{label:40s}" + "".join(f"{t * 1e3:10.1f}ms" for t in times)
        if ck:
            row += f"{times[0] / times[1]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
