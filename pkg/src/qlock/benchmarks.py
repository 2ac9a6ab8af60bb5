"""Bundled reversible benchmark circuits and the obfuscation experiment grid."""
from __future__ import annotations

import csv
import hashlib
import io
import statistics
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from . import qasm
from .circuit import Circuit, Gate
from .compiler import CompileOptions, CouplingMap, compile, default_map
from .deobfuscator import StitchMode, deobfuscate
from .metrics import dfc, fidelity, tvd
from .obfuscator import (
    LOCATIONS,
    InsertionLocation,
    ObfuscationRecord,
    RandomBlockParams,
    StealthWarning,
    obfuscate,
)
from .rng import derive_seed
from .simulator import DEFAULT_NOISE, NoiseModel, ideal_outcome, sample


class UnknownBenchmark(KeyError):
    pass


class BenchmarkIntegrityError(RuntimeError):
    pass


@dataclass(frozen=True)
class _Entry:
    sha256: str
    input: str
    correct_output: str


REGISTRY: dict[str, _Entry] = {
    "gt4": _Entry("3ef5b263c6d94ef1c7abdc4f3164b0f5ab11dcf267bb824420a57732a5c94d0e", "101", "1"),
    "mini_alu": _Entry("aa40c7d630825f9cf81bca64f100c50d3cd6fe65119258f96bf6c1f6480ecabb", "110", "10"),
    "counter": _Entry("c91b32678b9212dfebef2d08551f74182f1af4a9d58b247beda3c4ec28935a50", "1000", "010"),
    "decod24": _Entry("ca2d8d6623fa5d6fe16e637f6f2d836d68c3f91402480ed050161a826760dfaf", "10", "0100"),
    "rd53": _Entry("561947d23d4f719999e23696eb529110ec88a48b35af9957806dfeefad5f7754", "11010", "110"),
    "adder_1bit": _Entry("59fcb393f0fedaf991ddc1adae41756b58f266f9e76c877c553999acc4672635", "000", "00"),
    "rd73": _Entry("227a5a8f1f1bfac1f9b31cddeb8fa30fca2e6824294bf423578da3dc497c4059", "1011011", "101"),
    "sym6": _Entry("26f46e308c2e85348746ae87495f7a2951ec75dd76f2b377316a274d9d958e48", "110100", "1"),
    "big12": _Entry("79e1674c58f36bc657086354931e3f1c69004d544559606ad7477ae0504beca1", "11001010", "0001100"),
}

NAMES = tuple(REGISTRY)


@dataclass(frozen=True)
class Benchmark:
    name: str
    circuit: Circuit
    input: str  # full-width basis string; char i is qubit i
    correct_output: str
    source: str = ""


def _read(name: str) -> str:
    return resources.files("qlock").joinpath("data", f"{name}.qasm").read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def load_benchmark(name: str, input: str | None = None) -> Benchmark:
    """Load, hash-check and validate a bundled circuit.

    ``input`` overrides the stored input; it is zero-padded to full width.
    """
    if name not in REGISTRY:
        raise UnknownBenchmark(f"unknown benchmark {name!r}; known: {', '.join(NAMES)}")
    entry = REGISTRY[name]
    text = _read(name)
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    if digest != entry.sha256:
        raise BenchmarkIntegrityError(f"{name}.qasm hash {digest} does not match the pinned value")
    c = qasm.parse(text)
    raw = entry.input if input is None else input
    if len(raw) > c.n_qubits or set(raw) - {"0", "1"}:
        raise ValueError(f"bad input {raw!r} for {c.n_qubits} qubits")
    bits = raw.ljust(c.n_qubits, "0")
    out = ideal_outcome(c, bits)
    if input is None and out != entry.correct_output:
        raise BenchmarkIntegrityError(f"{name}: simulated output {out} != pinned {entry.correct_output}")
    return Benchmark(name, c, bits, out, c.metadata.get("source", ""))


def all_benchmarks() -> list[Benchmark]:
    return [load_benchmark(n) for n in NAMES]


# -- experiments -----------------------------------------------------------

CSV_HEADER = ("benchmark", "location", "refined", "seed", "n_block_gates", "tvd", "dfc",
              "fidelity_orig", "fidelity_deobf")


@dataclass(frozen=True)
class ExperimentSpec:
    benchmarks: tuple[str, ...] = NAMES
    locations: tuple[InsertionLocation, ...] = LOCATIONS
    refined: tuple[bool, ...] = (False, True)
    n_seeds: int = 100
    master_seed: int = 0
    n_gates: int = 3
    noise: NoiseModel = DEFAULT_NOISE
    shots: int = 10_000
    deobf_level: str = "logical"  # or "compiled"
    mode: StitchMode = StitchMode.FEED_LAYOUT
    coupling_map: CouplingMap | None = None

    def __post_init__(self):
        for b in self.benchmarks:
            if b not in REGISTRY:
                raise UnknownBenchmark(b)
        if self.n_seeds < 0:
            raise ValueError("n_seeds must be >= 0")
        if self.deobf_level not in ("logical", "compiled"):
            raise ValueError("deobf_level must be logical or compiled")


@dataclass(frozen=True)
class Row:
    benchmark: str
    location: str
    refined: bool
    seed: int
    n_block_gates: int
    tvd: float
    dfc: float
    fidelity_orig: float
    fidelity_deobf: float

    def cells(self) -> list[str]:
        return [self.benchmark, self.location, str(int(self.refined)), str(self.seed), str(self.n_block_gates),
                f"{self.tvd:.4f}", f"{self.dfc:.4f}", f"{self.fidelity_orig:.4f}", f"{self.fidelity_deobf:.4f}"]


def restore_logical(obf: Circuit, record: ObfuscationRecord) -> Circuit:
    """Owner-side restoration without compilation: the inverse block next to the block."""
    inv = [g.inverse() for g in reversed(record.block.gates)]
    n_blk = record.block.gate_count()
    loc = record.location
    if loc.kind == "front":
        at = 0
    elif loc.kind == "back":
        at = record.insertion_index + n_blk
    elif loc.side == "left":
        at = record.insertion_index + n_blk + 1
    else:
        at = record.insertion_index - 1
    insts = list(obf.instructions)
    return obf.replace(instructions=insts[:at] + inv + insts[at:])


def block_seed(master_seed: int, benchmark: str, index: int) -> int:
    """Seed of the ``index``-th random block for ``benchmark``; shared across locations."""
    return derive_seed(master_seed, "block", benchmark, index) % (2**31)


def _run_benchmark(spec: ExperimentSpec, name: str) -> list[Row]:
    b = load_benchmark(name)
    orig = b.circuit
    noise, shots = spec.noise, spec.shots
    d_orig = sample(orig, b.input, shots, noise, seed=derive_seed(spec.master_seed, "orig", name))
    f_orig = fidelity(d_orig, b.correct_output)
    cmap = spec.coupling_map or default_map(orig.n_qubits)
    compiled_orig_fid = None
    rows = []
    for refined in spec.refined:
        for loc in spec.locations:
            for i in range(spec.n_seeds):
                bseed = block_seed(spec.master_seed, name, i)
                params = RandomBlockParams(n_gates=spec.n_gates, refined=refined, seed=bseed)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", StealthWarning)
                    obf, rec = obfuscate(orig, params, loc)
                labels = (name, str(loc), int(refined), i)
                d_obf = sample(obf, b.input, shots, noise, seed=derive_seed(spec.master_seed, "obf", *labels))
                dseed = derive_seed(spec.master_seed, "deobf", *labels)
                if spec.deobf_level == "logical":
                    restored = restore_logical(obf, rec)
                    d_res = sample(restored, b.input, shots, noise, seed=dseed)
                    f_ref = f_orig
                else:
                    if compiled_orig_fid is None:
                        co = compile(orig, cmap)
                        d_co = sample(co.circuit, co.initial_layout.physical_input(b.input), shots, noise,
                                      seed=derive_seed(spec.master_seed, "orig-compiled", name))
                        compiled_orig_fid = fidelity(d_co, b.correct_output)
                    co = compile(obf, cmap)
                    st = deobfuscate(co, rec, cmap, spec.mode)
                    d_res = sample(st.circuit, st.initial_layout.physical_input(b.input), shots, noise, seed=dseed)
                    f_ref = compiled_orig_fid
                rows.append(Row(name, str(loc), refined, bseed, rec.block.gate_count(), tvd(d_orig, d_obf),
                                dfc(d_obf, b.correct_output), f_ref, fidelity(d_res, b.correct_output)))
    return rows


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    rows: list[Row] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(r.cells())
        return buf.getvalue()

    def cell(self, benchmark: str, location: str, refined: bool) -> list[Row]:
        return [r for r in self.rows if r.benchmark == benchmark and r.location == location and r.refined == refined]

    def summary(self) -> list[dict]:
        groups: dict[tuple, list[Row]] = {}
        for r in self.rows:
            groups.setdefault((r.benchmark, r.location, r.refined), []).append(r)
        out = []
        for (bench, loc, refined), rows in groups.items():
            entry = {"benchmark": bench, "location": loc, "refined": refined, "n": len(rows)}
            for metric in ("tvd", "dfc", "fidelity_deobf"):
                entry[metric] = describe([getattr(r, metric) for r in rows])
            entry["fidelity_orig"] = rows[0].fidelity_orig
            out.append(entry)
        return out

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        stats = ("mean", "median", "q1", "q3", "var")
        w.writerow(["benchmark", "location", "refined", "n"] + [f"{m}_{s}" for m in ("tvd", "dfc", "fidelity_deobf") for s in stats])
        for e in self.summary():
            w.writerow([e["benchmark"], e["location"], int(e["refined"]), e["n"]]
                       + [f"{e[m][s]:.4f}" for m in ("tvd", "dfc", "fidelity_deobf") for s in stats])
        return buf.getvalue()


def describe(values: list[float]) -> dict[str, float]:
    if len(values) == 1:
        v = values[0]
        return {"mean": v, "median": v, "q1": v, "q3": v, "var": 0.0}
    q1, _, q3 = statistics.quantiles(values, n=4, method="inclusive")
    return {
        "mean": statistics.fmean(values),
        "median": statistics.median(values),
        "q1": q1,
        "q3": q3,
        "var": statistics.pvariance(values),
    }


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> ExperimentResult:
    """Run the benchmark x refined x location x seed grid; rows come back in a fixed order."""
    if spec.n_seeds == 0 or not spec.benchmarks:
        return ExperimentResult(spec, [])
    if jobs > 1 and len(spec.benchmarks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_benchmark, [spec] * len(spec.benchmarks), spec.benchmarks))
    else:
        parts = [_run_benchmark(spec, n) for n in spec.benchmarks]
    return ExperimentResult(spec, [r for part in parts for r in part])
