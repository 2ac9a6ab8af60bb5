"""Random reversible blocks and their insertion into a circuit.

The block is secret; the obfuscated circuit is what leaves the owner's
hands. The :class:`ObfuscationRecord` holds what is needed to undo it.
"""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field

from .circuit import (
    Barrier,
    Circuit,
    CircuitError,
    Gate,
    GateKind,
    Measure,
    gate_split_index,
    validate,
)
from .rng import substream

ID_KEY = "id"


class ObfuscationError(ValueError):
    pass


class InfeasibleArity(ObfuscationError):
    pass


class QubitMismatch(ObfuscationError):
    pass


class InvalidParams(ObfuscationError):
    pass


class StealthWarning(UserWarning):
    """The block uses a gate kind absent from the original circuit."""


# -- parameters and locations ---------------------------------------------

@dataclass(frozen=True)
class RandomBlockParams:
    n_gates: int = 3
    allowed_kinds: frozenset | None = None  # None: kinds of the target circuit
    qubit_pool: tuple[int, ...] | None = None  # None: every qubit of the target
    refined: bool = False
    seed: int = 0
    measured_qubits: tuple[int, ...] | None = None  # None: measured qubits of the target

    def __post_init__(self):
        if not isinstance(self.n_gates, int) or self.n_gates < 1:
            raise InvalidParams(f"n_gates must be >= 1, got {self.n_gates!r}")
        if self.allowed_kinds is not None:
            kinds = frozenset(GateKind.from_name(k) if isinstance(k, str) else k for k in self.allowed_kinds)
            if not kinds:
                raise InvalidParams("allowed_kinds is empty")
            object.__setattr__(self, "allowed_kinds", kinds)
        if self.qubit_pool is not None:
            pool = tuple(sorted(set(int(q) for q in self.qubit_pool)))
            if not pool:
                raise InvalidParams("qubit_pool is empty")
            object.__setattr__(self, "qubit_pool", pool)
        if self.measured_qubits is not None:
            object.__setattr__(self, "measured_qubits", tuple(sorted(set(int(q) for q in self.measured_qubits))))


@dataclass(frozen=True)
class InsertionLocation:
    kind: str  # "front" | "middle" | "back"
    side: str | None = None  # "left" | "right" for middle

    def __post_init__(self):
        if self.kind not in ("front", "middle", "back"):
            raise ValueError(f"unknown location {self.kind!r}")
        if self.kind == "middle":
            if self.side is None:
                object.__setattr__(self, "side", "left")
            elif self.side not in ("left", "right"):
                raise ValueError(f"barrier side must be left or right, got {self.side!r}")
        elif self.side is not None:
            raise ValueError("only middle insertions have a barrier side")

    def __str__(self) -> str:
        return f"middle-{self.side}" if self.kind == "middle" else self.kind

    @classmethod
    def parse(cls, text: str) -> "InsertionLocation":
        text = text.strip().lower()
        if text in ("front", "back", "middle"):
            return cls(text)
        if text.startswith("middle-"):
            return cls("middle", text.split("-", 1)[1])
        raise ValueError(f"unknown location {text!r}; use front, back, middle, middle-left or middle-right")


FRONT = InsertionLocation("front")
BACK = InsertionLocation("back")
MIDDLE = InsertionLocation("middle", "left")
LOCATIONS = (FRONT, MIDDLE, BACK)


# -- record ----------------------------------------------------------------

def _gate_to_dict(g: Gate) -> dict:
    d = {"kind": g.kind.value, "qubits": list(g.qubits)}
    if g.param is not None:
        d["param"] = repr(g.param)  # exact decimal string
    return d


def _gate_from_dict(d: dict) -> Gate:
    param = d.get("param")
    return Gate(GateKind.from_name(d["kind"]), tuple(d["qubits"]), None if param is None else float(param))


@dataclass(frozen=True)
class ObfuscationRecord:
    block: Circuit
    location: InsertionLocation
    insertion_index: int
    original_gate_count: int
    barrier_tag: str | None = None
    split_gates: int | None = None  # original gates left of the marker barrier
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "block": {"n_qubits": self.block.n_qubits, "gates": [_gate_to_dict(g) for g in self.block.gates]},
            "location": str(self.location),
            "insertion_index": self.insertion_index,
            "original_gate_count": self.original_gate_count,
            "barrier_tag": self.barrier_tag,
            "split_gates": self.split_gates,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ObfuscationRecord":
        b = d["block"]
        block = Circuit(int(b["n_qubits"]), 0, [_gate_from_dict(g) for g in b["gates"]])
        return cls(
            block=block,
            location=InsertionLocation.parse(d["location"]),
            insertion_index=int(d["insertion_index"]),
            original_gate_count=int(d["original_gate_count"]),
            barrier_tag=d.get("barrier_tag"),
            split_gates=d.get("split_gates"),
            seed=d.get("seed"),
        )

    def fingerprint(self) -> str:
        """Short digest binding the record to the circuit it produced; the seed is excluded."""
        d = self.to_dict()
        d.pop("seed")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


# -- generation ------------------------------------------------------------

def _sorted_kinds(kinds) -> list[GateKind]:
    return sorted(kinds, key=lambda k: k.value)


def generate_block(params: RandomBlockParams, n_qubits: int | None = None) -> Circuit:
    """Draw a random block of ``params.n_gates`` gates.

    Kinds come uniformly from ``allowed_kinds`` and qubit tuples uniformly
    without repetition from the pool. A refined block starts with X on one
    measured qubit and keeps every later gate off that qubit.
    """
    if params.allowed_kinds is None or params.qubit_pool is None:
        raise InvalidParams("generate_block needs explicit allowed_kinds and qubit_pool")
    pool = list(params.qubit_pool)
    n_qubits = n_qubits if n_qubits is not None else max(pool) + 1
    if max(pool) >= n_qubits:
        raise QubitMismatch(f"qubit pool {pool} does not fit {n_qubits} qubits")
    rng = substream(params.seed, "block")
    kinds = _sorted_kinds(params.allowed_kinds)
    gates: list[Gate] = []
    n_random = params.n_gates
    if params.refined:
        measured = sorted(set(params.measured_qubits or ()) & set(pool))
        if not measured:
            raise InvalidParams("a refined block needs a measured qubit inside the pool")
        m = int(measured[rng.integers(len(measured))])
        gates.append(Gate(GateKind.X, (m,)))
        pool = [q for q in pool if q != m]
        n_random -= 1
    if n_random > 0:
        widest = max(k.arity for k in kinds)
        if widest > len(pool):
            raise InfeasibleArity(f"{widest}-qubit gates do not fit a pool of {len(pool)} qubits")
    for _ in range(n_random):
        kind = kinds[rng.integers(len(kinds))]
        qubits = tuple(int(q) for q in rng.choice(pool, size=kind.arity, replace=False))
        param = float(rng.uniform(0.0, 2 * math.pi)) if kind.parametric else None
        gates.append(Gate(kind, qubits, param))
    return Circuit(n_qubits, 0, gates)


# -- insertion -------------------------------------------------------------

def _content_tag(original: Circuit, block: Circuit) -> str:
    h = hashlib.sha256()
    for c in (original, block):
        h.update(repr((c.n_qubits, c.instructions)).encode("utf-8"))
    return "m" + h.hexdigest()[:8]


def insert(
    original: Circuit,
    block: Circuit,
    location: InsertionLocation,
    *,
    split_gates: int | None = None,
    seed: int | None = None,
) -> tuple[Circuit, ObfuscationRecord]:
    """Place ``block`` into ``original`` at ``location``.

    Back insertions go after the last gate and before the measurements.
    Middle insertions split the original after ``split_gates`` gates
    (default: half, rounded down) and add one full-width tagged barrier with
    the block on the requested side of it.
    """
    if block.n_qubits > original.n_qubits:
        raise QubitMismatch(f"block uses {block.n_qubits} qubits, original has {original.n_qubits}")
    if any(not isinstance(i, Gate) for i in block.instructions):
        raise ObfuscationError("a block may only contain gates")
    problems = validate(original)
    if problems:
        raise ObfuscationError("; ".join(problems))
    body = [i for i in original.instructions if not isinstance(i, Measure)]
    measures = [i for i in original.instructions if isinstance(i, Measure)]
    blk = list(block.instructions)
    tag = None
    n_orig = original.gate_count()
    if location.kind == "front":
        idx = 0
        insts = blk + body + measures
        split_gates = None
    elif location.kind == "back":
        idx = len(body)
        insts = body + blk + measures
        split_gates = None
    else:
        split_gates = n_orig // 2 if split_gates is None else split_gates
        if not 0 <= split_gates <= n_orig:
            raise ObfuscationError(f"split point {split_gates} outside 0..{n_orig}")
        cut = gate_split_index(original.without_measures(), split_gates)
        tag = _content_tag(original, block)
        marker = Barrier(frozenset(range(original.n_qubits)), tag)
        left, right = body[:cut], body[cut:]
        if location.side == "left":
            idx = len(left)
            insts = left + blk + [marker] + right + measures
        else:
            idx = len(left) + 1
            insts = left + [marker] + blk + right + measures
    record = ObfuscationRecord(
        block=block.replace(n_qubits=original.n_qubits, metadata={}),
        location=location,
        insertion_index=idx,
        original_gate_count=n_orig,
        barrier_tag=tag,
        split_gates=split_gates,
        seed=seed,
    )
    meta = dict(original.metadata)
    meta[ID_KEY] = record.fingerprint()
    return Circuit(original.n_qubits, original.n_clbits, insts, meta), record


def default_params(original: Circuit, params: RandomBlockParams) -> RandomBlockParams:
    """Fill unset fields of ``params`` from ``original``.

    Default kinds are the original's kinds, keeping only those whose arity
    fits the qubits left after a refined block reserves its measured qubit.
    """
    pool = params.qubit_pool if params.qubit_pool is not None else tuple(range(original.n_qubits))
    measured = params.measured_qubits if params.measured_qubits is not None else tuple(original.measured_qubits())
    kinds = params.allowed_kinds
    if kinds is None:
        room = len(pool) - (1 if params.refined else 0)
        kinds = frozenset(k for k in original.kinds() if k.arity <= room)
        if not kinds:
            kinds = frozenset({GateKind.X})
    return RandomBlockParams(
        n_gates=params.n_gates,
        allowed_kinds=kinds,
        qubit_pool=pool,
        refined=params.refined,
        seed=params.seed,
        measured_qubits=measured,
    )


def obfuscate(
    original: Circuit,
    params: RandomBlockParams | None = None,
    location: InsertionLocation = BACK,
    *,
    split_gates: int | None = None,
) -> tuple[Circuit, ObfuscationRecord]:
    """Generate a block for ``original`` and insert it."""
    params = default_params(original, params or RandomBlockParams())
    block = generate_block(params, original.n_qubits)
    foreign = block.kinds() - original.kinds()
    if foreign:
        names = ", ".join(sorted(k.value for k in foreign))
        warnings.warn(f"block uses gate kinds absent from the original: {names}", StealthWarning, stacklevel=2)
    return insert(original, block, location, split_gates=split_gates, seed=params.seed)
