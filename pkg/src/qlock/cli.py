"""``qlock`` command line: obfuscate, compile, deobfuscate, simulate, metrics, attack, bench.

Exit status: 0 on success, 2 for usage or validation errors, 3 for internal errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

from . import __version__, qasm
from .attack import Scenario, run_attack
from .benchmarks import NAMES, ExperimentSpec, UnknownBenchmark, load_benchmark, run_experiment
from .circuit import Circuit, GateKind
from .compiler import CompiledCircuit, CompileOptions, CouplingMap, compile, default_map
from .deobfuscator import StitchMode, deobfuscate
from .metrics import dfc, fidelity, tvd
from .obfuscator import InsertionLocation, RandomBlockParams, StealthWarning, obfuscate
from .simulator import NOISE_PRESETS, Distribution, NoiseModel, sample

EXIT_OK, EXIT_USAGE, EXIT_INTERNAL = 0, 2, 3

DEFAULTS = {
    "seed": 0,
    "shots": 10_000,
    "noise_preset": "default",
    "p1": None,
    "p2": None,
    "p_ro": None,
    "map": None,
    "out_dir": ".",
    "threshold": 0.5,
    "scenario": "middle-barrier",
}


class UsageError(Exception):
    pass


# -- config resolution -----------------------------------------------------

def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = set(data) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return data


def _setting(args: argparse.Namespace, cfg: dict, key: str):
    """Flag, then config file, then (for the seed) QLOCK_SEED, then the default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in cfg:
        return cfg[key]
    if key == "seed" and os.environ.get("QLOCK_SEED"):
        try:
            return int(os.environ["QLOCK_SEED"])
        except ValueError:
            raise UsageError(f"QLOCK_SEED must be an integer, got {os.environ['QLOCK_SEED']!r}") from None
    return DEFAULTS[key]


def _noise(args, cfg) -> NoiseModel:
    preset = _setting(args, cfg, "noise_preset")
    if preset not in NOISE_PRESETS:
        raise UsageError(f"unknown noise preset {preset!r}; use {', '.join(NOISE_PRESETS)}")
    base = NOISE_PRESETS[preset]
    vals = {}
    for key in ("p1", "p2", "p_ro"):
        v = _setting(args, cfg, key)
        vals[key] = getattr(base, key) if v is None else float(v)
    return NoiseModel(**vals)


def _seed(args, cfg) -> int:
    s = _setting(args, cfg, "seed")
    try:
        return int(s)
    except (TypeError, ValueError):
        raise UsageError(f"seed must be an integer, got {s!r}") from None


def _shots(args, cfg) -> int:
    s = int(_setting(args, cfg, "shots"))
    if s < 1:
        raise UsageError("shots must be positive")
    return s


def _out_dir(args, cfg) -> Path:
    d = Path(_setting(args, cfg, "out_dir"))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _coupling_map(args, cfg, n_qubits: int) -> CouplingMap:
    path = _setting(args, cfg, "map")
    if path is None:
        return default_map(n_qubits)
    if path == "valencia":
        return CouplingMap.valencia()
    if path.startswith("line:"):
        return CouplingMap.line(int(path.split(":", 1)[1]))
    try:
        return CouplingMap.from_json(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read coupling map {path}: {exc}") from None
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise UsageError(f"malformed coupling map {path}: {exc}") from None


# -- inputs ----------------------------------------------------------------

def _read_circuit(spec: str) -> tuple[Circuit, str | None]:
    """A QASM path, or ``bench:NAME`` for a bundled benchmark (which brings its input)."""
    if spec.startswith("bench:"):
        b = load_benchmark(spec[len("bench:"):])
        return b.circuit, b.input
    path = Path(spec)
    if not path.is_file():
        raise UsageError(f"no such file: {spec}")
    return qasm.load(path), None


def _stem(spec: str) -> str:
    return spec[len("bench:"):] if spec.startswith("bench:") else Path(spec).name.split(".")[0]


def _read_json(path: str, what: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} {path} is not valid JSON: {exc}") from None


def _write_json(path: Path, data) -> None:
    qasm.atomic_write(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def _input_bits(c: Circuit, given: str | None, fallback: str | None) -> str:
    bits = given if given is not None else (fallback or "")
    if set(bits) - {"0", "1"} or len(bits) > c.n_qubits:
        raise UsageError(f"input must be a bit string of at most {c.n_qubits} characters")
    return bits.ljust(c.n_qubits, "0")


# -- subcommands -----------------------------------------------------------

def cmd_obfuscate(args, cfg) -> int:
    original, _ = _read_circuit(args.input)
    seed = _seed(args, cfg)
    kinds = None
    if args.kinds:
        kinds = frozenset(GateKind.from_name(k) for k in args.kinds.split(","))
    params = RandomBlockParams(n_gates=args.n_gates, allowed_kinds=kinds, refined=args.refined, seed=seed)
    location = InsertionLocation.parse(args.location)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", StealthWarning)
        obf, record = obfuscate(original, params, location, split_gates=args.split)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out_dir = _out_dir(args, cfg)
    stem = _stem(args.input)
    out = Path(args.output) if args.output else out_dir / f"{stem}.obf.qasm"
    rec_path = Path(args.record) if args.record else out_dir / f"{stem}.record.json"
    qasm.dump(obf, out)
    qasm.save_record(qasm.SidecarRecord(record, seeds={"block": seed}), rec_path)
    print(f"obfuscated {stem}: {original.gate_count()} -> {obf.gate_count()} gates at {location}")
    print(f"wrote {out} and {rec_path}")
    return EXIT_OK


def cmd_compile(args, cfg) -> int:
    c, _ = _read_circuit(args.input)
    cmap = _coupling_map(args, cfg, c.n_qubits)
    compiled = compile(c, cmap, CompileOptions(layout="trivial" if args.trivial_layout else "greedy"))
    out_dir = _out_dir(args, cfg)
    stem = _stem(args.input)
    out = Path(args.output) if args.output else out_dir / f"{stem}.compiled.qasm"
    rep = Path(args.report) if args.report else out_dir / f"{stem}.compile_report.json"
    qasm.dump(compiled.circuit, out)
    _write_json(rep, compiled.report())
    print(f"compiled {stem}: {c.gate_count()} -> {compiled.circuit.gate_count()} gates on {cmap.n_physical} qubits")
    for name, before, after in compiled.pass_log:
        print(f"  {name:18s} {before:6d} -> {after:6d}")
    print(f"wrote {out} and {rep}")
    return EXIT_OK


def _report_path(compiled_path: str, given: str | None) -> str:
    if given:
        return given
    p = Path(compiled_path)
    stem = p.name.split(".")[0]
    guess = p.with_name(f"{stem}.compile_report.json")
    if not guess.is_file():
        raise UsageError("pass --report with the compile report of the compiled circuit")
    return str(guess)


def cmd_deobfuscate(args, cfg) -> int:
    circ, _ = _read_circuit(args.compiled)
    report = _read_json(_report_path(args.compiled, args.report), "compile report")
    try:
        compiled = CompiledCircuit.from_report(circ, report)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed compile report: {exc}") from None
    side = qasm.load_record(args.record)
    st = deobfuscate(compiled, side.record, mode=StitchMode.parse(args.mode), reoptimize=args.reoptimize)
    out_dir = _out_dir(args, cfg)
    stem = _stem(args.compiled)
    out = Path(args.output) if args.output else out_dir / f"{stem}.restored.qasm"
    rep = Path(args.stitch_report) if args.stitch_report else out_dir / f"{stem}.stitch_report.json"
    qasm.dump(st.circuit, out)
    _write_json(rep, st.report())
    print(f"restored {stem} ({st.mode.value}): {st.circuit.gate_count()} gates, {st.junction_swaps} junction SWAPs")
    print(f"wrote {out} and {rep}")
    return EXIT_OK


def cmd_simulate(args, cfg) -> int:
    c, bench_input = _read_circuit(args.input)
    noise = NOISE_PRESETS["noiseless"] if args.noiseless else _noise(args, cfg)
    bits = args.bits
    if args.report:
        rep = _read_json(args.report, "report")
        layout = rep.get("initial_layout")
        if layout is None:
            raise UsageError("report has no initial_layout")
        virtual = (bits if bits is not None else (bench_input or "")).ljust(int(rep.get("n_virtual", len(layout))), "0")
        phys = ["0"] * len(layout)
        for v, ch in enumerate(virtual):
            phys[layout[v]] = ch
        bits = "".join(phys)
    bits = _input_bits(c, bits, bench_input)
    d = sample(c, bits, _shots(args, cfg), noise, seed=_seed(args, cfg))
    text = d.to_json()
    if args.output:
        qasm.atomic_write(args.output, text + "\n")
    print(text)
    return EXIT_OK


def _read_distribution(path: str) -> Distribution:
    data = _read_json(path, "distribution")
    try:
        if "counts" in data:
            return Distribution(data["counts"], int(data.get("shots", sum(data["counts"].values()))))
        return Distribution(data, sum(data.values()))
    except (TypeError, ValueError, AttributeError) as exc:
        raise UsageError(f"malformed distribution {path}: {exc}") from None


def cmd_metrics(args, cfg) -> int:
    a = _read_distribution(args.reference)
    out = {}
    if args.other:
        out["tvd"] = tvd(a, _read_distribution(args.other))
    target = _read_distribution(args.other) if args.other else a
    if args.correct is not None:
        out["dfc"] = dfc(target, args.correct)
        out["fidelity"] = fidelity(target, args.correct)
    if not out:
        raise UsageError("give a second distribution for TVD and/or --correct for DFC and fidelity")
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def cmd_attack(args, cfg) -> int:
    obf, bench_input = _read_circuit(args.input)
    original = _read_circuit(args.original)[0] if args.original else None
    scenario = Scenario.parse(_setting(args, cfg, "scenario"))
    threshold = float(_setting(args, cfg, "threshold"))
    report = run_attack(
        obf, _input_bits(obf, args.bits, bench_input), _shots(args, cfg), _noise(args, cfg),
        threshold, scenario, _seed(args, cfg), original=original, max_candidates=args.max_candidates,
    )
    out_dir = _out_dir(args, cfg)
    stem = _stem(args.input)
    jpath = Path(args.json) if args.json else out_dir / f"{stem}.attack.json"
    cpath = Path(args.csv) if args.csv else out_dir / f"{stem}.attack.csv"
    qasm.atomic_write(jpath, report.to_json())
    qasm.atomic_write(cpath, report.to_csv())
    print(f"{scenario.value}: {report.choices_before} candidates, {report.choices_after} survive at threshold {threshold}")
    print(f"wrote {jpath} and {cpath}")
    return EXIT_OK


def cmd_bench(args, cfg) -> int:
    if args.list:
        for n in NAMES:
            b = load_benchmark(n)
            print(f"{n:12s} {b.circuit.n_qubits:3d} qubits {b.circuit.gate_count():4d} gates  {b.source}")
        return EXIT_OK
    names = tuple(args.benchmarks.split(",")) if args.benchmarks else NAMES
    locations = tuple(InsertionLocation.parse(x) for x in args.locations.split(","))
    refined = {"both": (False, True), "yes": (True,), "no": (False,)}[args.refined]
    spec = ExperimentSpec(
        benchmarks=names, locations=locations, refined=refined, n_seeds=args.n_seeds,
        master_seed=_seed(args, cfg), n_gates=args.n_gates, noise=_noise(args, cfg), shots=_shots(args, cfg),
        deobf_level=args.level, mode=StitchMode.parse(args.mode),
    )
    result = run_experiment(spec, jobs=args.jobs)
    out_dir = _out_dir(args, cfg)
    out = Path(args.output) if args.output else out_dir / "experiment.csv"
    summ = Path(args.summary) if args.summary else out_dir / "experiment_summary.csv"
    qasm.atomic_write(out, result.to_csv())
    qasm.atomic_write(summ, result.summary_csv())
    print(f"{len(result.rows)} rows over {len(names)} benchmarks")
    for e in result.summary():
        print(f"  {e['benchmark']:12s} {e['location']:12s} refined={int(e['refined'])} "
              f"mean TVD {e['tvd']['mean']:.3f}  mean DFC {e['dfc']['mean']:+.3f}")
    print(f"wrote {out} and {summ}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, *, noise: bool = False, shots: bool = False) -> None:
    p.add_argument("--seed", type=int, default=None, help="master seed (default: config, then $QLOCK_SEED, then 0)")
    p.add_argument("--config", default=None, help="JSON config file; flags override it")
    p.add_argument("--out-dir", dest="out_dir", default=None, help="directory for default output paths (default: .)")
    if shots:
        p.add_argument("--shots", type=int, default=None, help="number of shots (default: 10000)")
    if noise:
        p.add_argument("--noise-preset", dest="noise_preset", default=None,
                       help=f"one of {', '.join(NOISE_PRESETS)} (default: default)")
        p.add_argument("--p1", type=float, default=None, help="1-qubit gate X/Z error probability")
        p.add_argument("--p2", type=float, default=None, help="multi-qubit gate depolarizing probability")
        p.add_argument("--p-ro", dest="p_ro", type=float, default=None, help="readout flip probability")


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonnegative(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qlock", description="Obfuscate reversible circuits against untrusted compilers.")
    parser.add_argument("--version", action="version", version=f"qlock {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("obfuscate", help="insert a random block; writes circuit and secret record")
    p.add_argument("input", help="QASM file or bench:NAME")
    p.add_argument("--location", default="back", help="front, middle, middle-left, middle-right or back (default: back)")
    p.add_argument("--n-gates", dest="n_gates", type=_positive, default=3, help="block size (default: 3)")
    p.add_argument("--refined", action="store_true", help="start the block with X on a measured qubit")
    p.add_argument("--kinds", default=None, help="comma-separated gate kinds (default: kinds in the input)")
    p.add_argument("--split", type=_nonnegative, default=None, help="middle: original gates left of the barrier")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--record", default=None, help="sidecar record path")
    _add_common(p)
    p.set_defaults(func=cmd_obfuscate)

    p = sub.add_parser("compile", help="run the mock compiler")
    p.add_argument("input")
    p.add_argument("--map", default=None, help="coupling map JSON, 'valencia' or 'line:N' (default: valencia up to 5 qubits, else a line)")
    p.add_argument("--trivial-layout", dest="trivial_layout", action="store_true")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--report", default=None, help="compile report path")
    _add_common(p)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("deobfuscate", help="stitch the compiled inverse block into a compiled circuit")
    p.add_argument("compiled")
    p.add_argument("--record", required=True)
    p.add_argument("--report", default=None, help="compile report (default: NAME.compile_report.json beside the input)")
    p.add_argument("--mode", default="feed", help="feed or swap (default: feed)")
    p.add_argument("--reoptimize", action="store_true", help="run peephole optimization on the result")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--stitch-report", dest="stitch_report", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_deobfuscate)

    p = sub.add_parser("simulate", help="sample measurement outcomes")
    p.add_argument("input")
    p.add_argument("--bits", default=None, help="input basis string, qubit 0 first (default: zeros)")
    p.add_argument("--report", default=None, help="compile/stitch report; --bits is then mapped through its initial layout")
    p.add_argument("--noiseless", action="store_true")
    p.add_argument("-o", "--output", default=None)
    _add_common(p, noise=True, shots=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("metrics", help="TVD between two distributions; DFC and fidelity against a correct outcome")
    p.add_argument("reference", help="distribution JSON")
    p.add_argument("other", nargs="?", default=None, help="second distribution JSON")
    p.add_argument("--correct", default=None, help="correct outcome string")
    _add_common(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("attack", help="pruning attack on an obfuscated circuit")
    p.add_argument("input")
    p.add_argument("--bits", default=None)
    p.add_argument("--scenario", default=None, help="middle-barrier, unknown-edge or unknown-count")
    p.add_argument("--threshold", type=float, default=None, help="discard candidates with TVD below this (default: 0.5)")
    p.add_argument("--original", default=None, help="true original, used only to label candidates")
    p.add_argument("--max-candidates", dest="max_candidates", type=_positive, default=4096)
    p.add_argument("--json", default=None)
    p.add_argument("--csv", default=None)
    _add_common(p, noise=True, shots=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bench", help="run the obfuscation experiment grid")
    p.add_argument("--list", action="store_true", help="list bundled benchmarks")
    p.add_argument("--benchmarks", default=None, help="comma-separated names (default: all)")
    p.add_argument("--locations", default="front,middle,back")
    p.add_argument("--refined", choices=("both", "yes", "no"), default="both")
    p.add_argument("--n-seeds", dest="n_seeds", type=_nonnegative, default=100)
    p.add_argument("--n-gates", dest="n_gates", type=_positive, default=3)
    p.add_argument("--level", choices=("logical", "compiled"), default="logical")
    p.add_argument("--mode", default="feed")
    p.add_argument("--jobs", type=_positive, default=1)
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--summary", default=None)
    _add_common(p, noise=True, shots=True)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = _load_config(args.config)
        return args.func(args, cfg)
    except (UsageError, ValueError, KeyError, UnknownBenchmark, FileNotFoundError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
