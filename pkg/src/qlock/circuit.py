"""Circuit IR: gate kinds, instructions, validation, inversion and splitting.

Qubit ordering is little-endian throughout the package: qubit ``i`` is bit
``i`` of a basis-state index, and gate matrices are written with
``qubits[0]`` as the least significant local bit.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np


class CircuitError(ValueError):
    """Base class for malformed-circuit errors."""


class MeasurementPresent(CircuitError):
    pass


class QubitCountMismatch(CircuitError):
    pass


class TooFewGates(CircuitError):
    pass


_S2 = 1 / math.sqrt(2)


def _mcx_matrix(n_controls: int) -> np.ndarray:
    dim = 2 ** (n_controls + 1)
    m = np.eye(dim, dtype=complex)
    ctrl = (1 << n_controls) - 1
    tbit = 1 << n_controls
    a, b = ctrl, ctrl | tbit
    m[[a, b]] = m[[b, a]]
    return m


_FIXED_MATRICES = {
    "id": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "sx": 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]]),
    "sxdg": 0.5 * np.array([[1 - 1j, 1 + 1j], [1 + 1j, 1 - 1j]]),
    "h": _S2 * np.array([[1, 1], [1, -1]], dtype=complex),
    "s": np.diag([1, 1j]),
    "sdg": np.diag([1, -1j]),
    "t": np.diag([1, np.exp(1j * math.pi / 4)]),
    "tdg": np.diag([1, np.exp(-1j * math.pi / 4)]),
    "cx": _mcx_matrix(1),
    "swap": np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
    ),
    "ccx": _mcx_matrix(2),
    "c3x": _mcx_matrix(3),
}


class GateKind(enum.Enum):
    """The closed gate vocabulary. Values are the textual (QASM) names."""

    I = "id"
    X = "x"
    SX = "sx"
    SXdg = "sxdg"
    H = "h"
    S = "s"
    Sdg = "sdg"
    T = "t"
    Tdg = "tdg"
    RZ = "rz"
    CX = "cx"
    SWAP = "swap"
    CCX = "ccx"
    C3X = "c3x"

    @property
    def arity(self) -> int:
        return _ARITY.get(self, 1)

    @property
    def parametric(self) -> bool:
        return self is GateKind.RZ

    @property
    def adjoint(self) -> "GateKind":
        return _ADJOINT.get(self, self)

    @property
    def classical(self) -> bool:
        """True for kinds that permute computational basis states."""
        return self in CLASSICAL_KINDS

    def matrix(self, param: float | None = None) -> np.ndarray:
        if self is GateKind.RZ:
            if param is None:
                raise ValueError("rz needs an angle")
            return np.diag([np.exp(-0.5j * param), np.exp(0.5j * param)])
        return _FIXED_MATRICES[self.value]

    @classmethod
    def from_name(cls, name: str) -> "GateKind":
        return cls(name)


_ARITY = {GateKind.CX: 2, GateKind.SWAP: 2, GateKind.CCX: 3, GateKind.C3X: 4}
_ADJOINT = {
    GateKind.S: GateKind.Sdg,
    GateKind.Sdg: GateKind.S,
    GateKind.T: GateKind.Tdg,
    GateKind.Tdg: GateKind.T,
    GateKind.SX: GateKind.SXdg,
    GateKind.SXdg: GateKind.SX,
}
CLASSICAL_KINDS = frozenset(
    {GateKind.X, GateKind.CX, GateKind.SWAP, GateKind.CCX, GateKind.C3X}
)


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    qubits: tuple[int, ...]
    param: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.param is not None:
            object.__setattr__(self, "param", float(self.param))

    def inverse(self) -> "Gate":
        if self.kind is GateKind.RZ:
            return Gate(GateKind.RZ, self.qubits, -self.param)
        return Gate(self.kind.adjoint, self.qubits)

    def matrix(self) -> np.ndarray:
        return self.kind.matrix(self.param)

    def __str__(self) -> str:
        p = f"({self.param!r})" if self.param is not None else ""
        return f"{self.kind.value}{p} " + ",".join(f"q{q}" for q in self.qubits)


@dataclass(frozen=True)
class Barrier:
    qubits: frozenset[int]
    tag: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", frozenset(int(q) for q in self.qubits))


@dataclass(frozen=True)
class Measure:
    qubit: int
    clbit: int


Instruction = Union[Gate, Barrier, Measure]


def instruction_qubits(inst: Instruction) -> tuple[int, ...]:
    if isinstance(inst, Gate):
        return inst.qubits
    if isinstance(inst, Barrier):
        return tuple(sorted(inst.qubits))
    return (inst.qubit,)


@dataclass(frozen=True)
class Circuit:
    """Immutable ordered instruction list over ``n_qubits`` qubits.

    Structural equality (``==``) compares qubit/clbit counts and
    instructions; metadata is carried along but ignored by ``==``.
    """

    n_qubits: int
    n_clbits: int = 0
    instructions: tuple[Instruction, ...] = ()
    metadata: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))
        object.__setattr__(self, "metadata", dict(self.metadata))

    # -- views ---------------------------------------------------------
    @property
    def gates(self) -> list[Gate]:
        return [i for i in self.instructions if isinstance(i, Gate)]

    @property
    def measures(self) -> list[Measure]:
        return [i for i in self.instructions if isinstance(i, Measure)]

    @property
    def barriers(self) -> list[Barrier]:
        return [i for i in self.instructions if isinstance(i, Barrier)]

    def gate_count(self) -> int:
        return sum(1 for i in self.instructions if isinstance(i, Gate))

    def kinds(self) -> set[GateKind]:
        return {g.kind for g in self.gates}

    def measured_qubits(self) -> list[int]:
        return sorted({m.qubit for m in self.measures})

    def is_classical(self) -> bool:
        return all(g.kind.classical for g in self.gates)

    def without_measures(self) -> "Circuit":
        insts = [i for i in self.instructions if not isinstance(i, Measure)]
        return self.replace(instructions=insts)

    def replace(self, **changes) -> "Circuit":
        fields = dict(
            n_qubits=self.n_qubits,
            n_clbits=self.n_clbits,
            instructions=self.instructions,
            metadata=self.metadata,
        )
        fields.update(changes)
        return Circuit(**fields)

    def __len__(self) -> int:
        return len(self.instructions)

    def __str__(self) -> str:
        lines = [f"Circuit(n_qubits={self.n_qubits}, n_clbits={self.n_clbits})"]
        for inst in self.instructions:
            if isinstance(inst, Gate):
                lines.append(f"  {inst}")
            elif isinstance(inst, Barrier):
                tag = f" [{inst.tag}]" if inst.tag else ""
                lines.append(f"  barrier {sorted(inst.qubits)}{tag}")
            else:
                lines.append(f"  measure q{inst.qubit} -> c{inst.clbit}")
        return "\n".join(lines)


def circuit(n_qubits: int, *instructions: Instruction, n_clbits: int = 0, **metadata) -> Circuit:
    """Convenience constructor: ``circuit(2, Gate(X,(0,)), ...)``."""
    return Circuit(n_qubits, n_clbits, instructions, metadata)


def gate(kind: GateKind | str, *qubits: int, param: float | None = None) -> Gate:
    if isinstance(kind, str):
        kind = GateKind.from_name(kind)
    return Gate(kind, qubits, param)


# -- operations ----------------------------------------------------------

def validate(c: Circuit) -> list[str]:
    """Return every invariant violation; an empty list means the circuit is ok."""
    problems: list[str] = []
    last_gate_on: dict[int, int] = {}
    for idx, inst in enumerate(c.instructions):
        if isinstance(inst, Gate):
            if len(inst.qubits) != inst.kind.arity:
                problems.append(
                    f"arity mismatch at instruction {idx}: {inst.kind.value} "
                    f"expects {inst.kind.arity} qubits, got {len(inst.qubits)}"
                )
            if len(set(inst.qubits)) != len(inst.qubits):
                problems.append(f"duplicate qubit at instruction {idx}")
            if inst.kind.parametric != (inst.param is not None):
                problems.append(f"parameter mismatch at instruction {idx}")
            if inst.param is not None and not math.isfinite(inst.param):
                problems.append(f"non-finite angle at instruction {idx}")
            for q in inst.qubits:
                last_gate_on[q] = idx
        qs = instruction_qubits(inst)
        if any(q < 0 or q >= c.n_qubits for q in qs):
            problems.append(f"qubit index out of range at instruction {idx}")
        if isinstance(inst, Measure) and not 0 <= inst.clbit < c.n_clbits:
            problems.append(f"clbit index out of range at instruction {idx}")
    for idx, inst in enumerate(c.instructions):
        if isinstance(inst, Measure) and last_gate_on.get(inst.qubit, -1) > idx:
            problems.append(
                f"gate after measurement of qubit {inst.qubit} (instruction {idx})"
            )
    return problems


def is_valid(c: Circuit) -> bool:
    return not validate(c)


def inverse(c: Circuit) -> Circuit:
    if c.measures:
        raise MeasurementPresent("cannot invert a circuit containing measurements")
    insts = [i.inverse() if isinstance(i, Gate) else i for i in reversed(c.instructions)]
    return c.replace(instructions=insts)


def concat(a: Circuit, b: Circuit) -> Circuit:
    if a.n_qubits != b.n_qubits:
        raise QubitCountMismatch(f"{a.n_qubits} != {b.n_qubits} qubits")
    if a.measures:
        raise MeasurementPresent("left operand of concat must not measure")
    meta = {**a.metadata, **b.metadata}
    return Circuit(
        a.n_qubits,
        max(a.n_clbits, b.n_clbits),
        a.instructions + b.instructions,
        meta,
    )


def gate_split_index(c: Circuit, n_left_gates: int) -> int:
    """Instruction index just after the ``n_left_gates``-th gate."""
    if n_left_gates == 0:
        return 0
    seen = 0
    for idx, inst in enumerate(c.instructions):
        if isinstance(inst, Gate):
            seen += 1
            if seen == n_left_gates:
                return idx + 1
    raise TooFewGates(f"circuit has only {seen} gates")


def split_at_midpoint(c: Circuit) -> tuple[Circuit, Circuit, int]:
    """Split after gate ``floor(gate_count / 2)``; measures stay on the right."""
    n = c.gate_count()
    if n < 2:
        raise TooFewGates("need at least 2 gates to split")
    idx = gate_split_index(c, n // 2)
    left = c.replace(instructions=c.instructions[:idx], n_clbits=c.n_clbits)
    right = c.replace(instructions=c.instructions[idx:])
    return left, right, idx


def remap(c: Circuit, mapping: Sequence[int], n_qubits: int | None = None) -> Circuit:
    """Relabel qubit ``q`` as ``mapping[q]``."""
    out: list[Instruction] = []
    for inst in c.instructions:
        if isinstance(inst, Gate):
            out.append(Gate(inst.kind, tuple(mapping[q] for q in inst.qubits), inst.param))
        elif isinstance(inst, Barrier):
            out.append(Barrier(frozenset(mapping[q] for q in inst.qubits), inst.tag))
        else:
            out.append(Measure(mapping[inst.qubit], inst.clbit))
    return c.replace(instructions=out, n_qubits=n_qubits or c.n_qubits)


def gates_only(instructions: Iterable[Instruction]) -> tuple[Gate, ...]:
    return tuple(i for i in instructions if isinstance(i, Gate))
