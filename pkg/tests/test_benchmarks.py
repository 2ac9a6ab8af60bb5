import csv
import io
import itertools

import pytest

from qlock.benchmarks import (
    CSV_HEADER,
    NAMES,
    REGISTRY,
    ExperimentSpec,
    UnknownBenchmark,
    all_benchmarks,
    block_seed,
    describe,
    load_benchmark,
    run_experiment,
)
from qlock.circuit import is_valid
from qlock.obfuscator import BACK, FRONT, LOCATIONS, MIDDLE
from qlock.simulator import NOISELESS, NoiseModel

from oracles import classical_eval


def bits(value: int, width: int) -> str:
    return "".join(str((value >> i) & 1) for i in range(width))


def popcount_out(xs: str, out_width: int) -> str:
    return bits(xs.count("1"), out_width)


def adder(x: str) -> str:
    a, b, c = (int(ch) for ch in x)
    return f"{a ^ b ^ c}{int(a + b + c >= 2)}"


def mini_alu(x: str) -> str:
    a, b, s = (int(ch) for ch in x)
    return f"{a & b}{(a & b) if s else (a ^ b)}"


def counter(x: str) -> str:
    v = int(x[2::-1], 2)
    return bits((v + 1) % 8, 3)


def gt4(x: str) -> str:
    return str(int(int(x[::-1], 2) > 4))


def decod24(x: str) -> str:
    v = int(x[::-1], 2)
    return "".join("1" if i == v else "0" for i in range(4))


def sym6(x: str) -> str:
    return str(int(x.count("1") in (2, 3, 4)))


def big12(x: str) -> str:
    a, b = int(x[3::-1], 2), int(x[7:3:-1], 2)
    carry = parity = zero = 0
    s = a + b
    carry ^= s >> 4
    b = s & 15
    parity ^= bin(b).count("1") & 1
    zero ^= int(b == 0)
    s = a + b
    carry ^= s >> 4
    a = s & 15
    parity ^= bin(a).count("1") & 1
    zero ^= int(a == 0)
    s = a + b
    carry ^= s >> 4
    b = (s & 15) ^ a
    return bits(b, 4) + f"{carry}{parity}{zero}"


# (input width, semantic model)
SEMANTICS = {
    "adder_1bit": (3, adder),
    "mini_alu": (3, mini_alu),
    "counter": (4, counter),
    "gt4": (3, gt4),
    "decod24": (2, decod24),
    "rd53": (5, lambda x: popcount_out(x, 3)),
    "rd73": (7, lambda x: popcount_out(x, 3)),
    "sym6": (6, sym6),
    "big12": (8, big12),
}


def test_registry_covers_every_benchmark():
    assert set(SEMANTICS) == set(NAMES) == set(REGISTRY)


@pytest.mark.parametrize("name", NAMES)
def test_truth_table(name):
    width, model = SEMANTICS[name]
    c = load_benchmark(name).circuit
    for combo in itertools.product("01", repeat=width):
        x = "".join(combo)
        assert classical_eval(c, x) == model(x), x


@pytest.mark.parametrize("name", NAMES)
def test_pinned_output_matches_model(name):
    b = load_benchmark(name)
    width, model = SEMANTICS[name]
    assert b.correct_output == model(b.input[:width])
    assert b.input[width:] == "0" * (b.circuit.n_qubits - width)


def test_size_spread():
    sizes = [(b.circuit.n_qubits, b.circuit.gate_count()) for b in all_benchmarks()]
    assert min(q for q, _ in sizes) == 4 and max(q for q, _ in sizes) == 12
    assert min(g for _, g in sizes) == 6 and max(g for _, g in sizes) == 111
    assert all(is_valid(b.circuit) for b in all_benchmarks())


def test_adder_shape():
    c = load_benchmark("adder_1bit").circuit
    assert c.n_qubits == 5 and c.gate_count() == 20
    assert {g.kind.value for g in c.gates} == {"x", "c3x"}


def test_counter_shape():
    assert load_benchmark("counter").circuit.gate_count() == 8


def test_adder_examples():
    assert load_benchmark("adder_1bit").correct_output == "00"
    assert load_benchmark("adder_1bit", "110").correct_output == "01"  # sum 0, carry 1


def test_unknown_benchmark():
    with pytest.raises(UnknownBenchmark):
        load_benchmark("nope")
    with pytest.raises(UnknownBenchmark):
        ExperimentSpec(benchmarks=("nope",))


def test_block_seed_is_stable_and_location_free():
    assert block_seed(0, "adder_1bit", 3) == block_seed(0, "adder_1bit", 3)
    assert block_seed(0, "adder_1bit", 3) != block_seed(0, "adder_1bit", 4)
    assert 0 <= block_seed(7, "rd53", 0) < 2**31


def test_adder_grid_rows_and_refined_back_corruption():
    spec = ExperimentSpec(benchmarks=("adder_1bit",), refined=(True,), n_seeds=100, noise=NOISELESS, shots=64)
    res = run_experiment(spec)
    assert len(res.rows) == 300
    back = res.cell("adder_1bit", "back", True)
    assert len(back) == 100 and all(r.dfc < 0 for r in back)
    assert all(r.fidelity_deobf == 1.0 for r in res.rows)


def test_zero_seeds_gives_header_only():
    res = run_experiment(ExperimentSpec(n_seeds=0))
    assert res.rows == []
    assert res.to_csv() == ",".join(CSV_HEADER) + "\n"


def test_experiment_reproducible_and_parallel_consistent():
    spec = ExperimentSpec(benchmarks=("gt4", "counter"), n_seeds=3, shots=500)
    a = run_experiment(spec)
    assert a.to_csv() == run_experiment(spec).to_csv()
    assert a.to_csv() == run_experiment(spec, jobs=2).to_csv()
    assert run_experiment(ExperimentSpec(benchmarks=("gt4",), n_seeds=3, shots=500, master_seed=1)).to_csv() != \
        run_experiment(ExperimentSpec(benchmarks=("gt4",), n_seeds=3, shots=500)).to_csv()


def test_csv_and_summary_layout():
    res = run_experiment(ExperimentSpec(benchmarks=("mini_alu",), n_seeds=4, shots=300))
    rows = list(csv.reader(io.StringIO(res.to_csv())))
    assert tuple(rows[0]) == CSV_HEADER and len(rows) == 1 + 4 * 3 * 2
    assert {r[1] for r in rows[1:]} == {str(loc) for loc in LOCATIONS}
    summ = list(csv.reader(io.StringIO(res.summary_csv())))
    assert len(summ) == 1 + 6 and "tvd_median" in summ[0]
    entry = res.summary()[0]
    assert entry["n"] == 4 and entry["tvd"]["q1"] <= entry["tvd"]["median"] <= entry["tvd"]["q3"]


def test_compiled_level_runs():
    spec = ExperimentSpec(benchmarks=("gt4",), locations=(FRONT, MIDDLE, BACK), n_seeds=2, shots=500,
                          deobf_level="compiled", noise=NoiseModel(0.0002, 0.001, 0.005))
    res = run_experiment(spec)
    assert len(res.rows) == 12
    assert all(r.fidelity_deobf > 0.8 for r in res.rows)


def test_describe():
    d = describe([1.0, 2.0, 3.0, 4.0])
    assert d["mean"] == 2.5 and d["median"] == 2.5 and d["var"] == 1.25
    assert d["q1"] == 1.75 and d["q3"] == 3.25
    assert describe([5.0]) == {"mean": 5.0, "median": 5.0, "q1": 5.0, "q3": 5.0, "var": 0.0}
