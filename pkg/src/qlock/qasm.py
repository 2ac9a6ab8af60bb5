"""Read and write the OpenQASM 2.0 subset, plus the JSON sidecar record.

Accepted statements: ``OPENQASM 2.0;``, ``include "qelib1.inc";`` (ignored),
one ``qreg``, at most one ``creg``, applications of the gate vocabulary,
``barrier`` and ``measure a -> b;``. Two comment conventions carry data
the base format lacks::

    // @name: adder_1bit          circuit metadata (before qreg)
    barrier q[0],q[1]; // tag:b7  barrier label
"""
from __future__ import annotations

import ast
import json
import math
import operator
import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .circuit import Barrier, Circuit, Gate, GateKind, Measure, validate

SIDECAR_VERSION = 1


class QasmError(ValueError):
    pass


class QasmSyntaxError(QasmError):
    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.message = message


class UnsupportedGate(QasmError):
    def __init__(self, name: str, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"unsupported gate {name!r}{where}")
        self.name = name


class ValidationError(QasmError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


class SchemaVersionMismatch(QasmError):
    pass


class RecordFormatError(QasmError):
    pass


# -- angle expressions ------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def _eval_angle(text: str) -> float:
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"bad angle expression {text!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(f"bad angle expression {text!r}")

    return ev(tree)


# -- parsing ----------------------------------------------------------------

_REG = re.compile(r"^(qreg|creg)\s+([A-Za-z_]\w*)\s*\[\s*(\d+)\s*\]$")
_GATE = re.compile(r"^([A-Za-z_]\w*)\s*(?:\((.*)\))?\s+(.+)$")
_ARG = re.compile(r"^([A-Za-z_]\w*)\s*\[\s*(\d+)\s*\]$")
_MEASURE = re.compile(r"^measure\s+(.+?)\s*->\s*(.+)$")
_META = re.compile(r"^//\s*@([A-Za-z_][\w.-]*)\s*:\s?(.*)$")
_TAG = re.compile(r"tag:(\S+)")
_KNOWN_NAMES = {k.value: k for k in GateKind}
_UNSUPPORTED_KEYWORDS = {"gate", "opaque", "if", "reset", "U", "CX"}


def parse(text: str) -> Circuit:
    qreg: tuple[str, int] | None = None
    creg: tuple[str, int] | None = None
    insts: list = []
    meta: dict[str, str] = {}
    seen_statement = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        code, _, comment = raw.partition("//")
        if not code.strip():
            m = _META.match(raw.strip())
            if m:
                meta[m.group(1)] = m.group(2)
            continue
        tag_match = _TAG.search(comment) if comment else None
        tag = tag_match.group(1) if tag_match else None

        pos = 0
        stripped_tail = code.rstrip()
        if not stripped_tail.endswith(";"):
            raise QasmSyntaxError(lineno, len(stripped_tail) + 1, "expected ';'")
        for piece in code.split(";")[:-1]:
            col = pos + (len(piece) - len(piece.lstrip())) + 1
            pos += len(piece) + 1
            stmt = " ".join(piece.split())
            if not stmt:
                raise QasmSyntaxError(lineno, col, "empty statement")

            def arg(token: str, reg: tuple[str, int] | None, kind: str) -> int:
                am = _ARG.match(token.strip())
                if not am:
                    raise QasmSyntaxError(lineno, col, f"expected {kind}[index], got {token.strip()!r}")
                if reg is None or am.group(1) != reg[0]:
                    raise QasmSyntaxError(lineno, col, f"unknown register {am.group(1)!r}")
                return int(am.group(2))

            if stmt.startswith("OPENQASM"):
                if seen_statement:
                    raise QasmSyntaxError(lineno, col, "version header must come first")
                if stmt != "OPENQASM 2.0":
                    raise QasmSyntaxError(lineno, col, f"unsupported version {stmt!r}")
                seen_statement = True
                continue
            seen_statement = True
            if stmt.startswith("include"):
                if stmt != 'include "qelib1.inc"':
                    raise QasmSyntaxError(lineno, col, "only qelib1.inc may be included")
                continue
            rm = _REG.match(stmt)
            if rm:
                kind, name, size = rm.group(1), rm.group(2), int(rm.group(3))
                if kind == "qreg":
                    if qreg is not None:
                        raise QasmSyntaxError(lineno, col, "only one quantum register is supported")
                    qreg = (name, size)
                else:
                    if creg is not None:
                        raise QasmSyntaxError(lineno, col, "only one classical register is supported")
                    creg = (name, size)
                continue
            if qreg is None:
                raise QasmSyntaxError(lineno, col, "statement before qreg declaration")
            mm = _MEASURE.match(stmt)
            if mm:
                insts.append(Measure(arg(mm.group(1), qreg, "qubit"), arg(mm.group(2), creg, "clbit")))
                continue
            if stmt.startswith("barrier"):
                body = stmt[len("barrier"):].strip()
                if body == qreg[0]:
                    qs = frozenset(range(qreg[1]))
                else:
                    qs = frozenset(arg(t, qreg, "qubit") for t in body.split(","))
                insts.append(Barrier(qs, tag))
                continue
            gm = _GATE.match(stmt)
            if not gm:
                raise QasmSyntaxError(lineno, col, f"cannot parse {stmt!r}")
            name, params, args = gm.group(1), gm.group(2), gm.group(3)
            if name in _UNSUPPORTED_KEYWORDS or name not in _KNOWN_NAMES:
                raise UnsupportedGate(name, lineno)
            kind = _KNOWN_NAMES[name]
            param = None
            if kind.parametric:
                if params is None:
                    raise QasmSyntaxError(lineno, col, f"{name} needs an angle")
                try:
                    param = _eval_angle(params)
                except ValueError as exc:
                    raise QasmSyntaxError(lineno, col, str(exc)) from None
            elif params is not None:
                raise QasmSyntaxError(lineno, col, f"{name} takes no parameters")
            qubits = tuple(arg(t, qreg, "qubit") for t in args.split(","))
            insts.append(Gate(kind, qubits, param))

    if qreg is None:
        raise QasmSyntaxError(1, 1, "missing qreg declaration")
    c = Circuit(qreg[1], creg[1] if creg else 0, insts, meta)
    problems = validate(c)
    if problems:
        raise ValidationError(problems)
    return c


def emit(c: Circuit) -> str:
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";']
    for key in sorted(c.metadata):
        value = str(c.metadata[key]).replace("\n", " ")
        lines.append(f"// @{key}: {value}")
    lines.append(f"qreg q[{c.n_qubits}];")
    if c.n_clbits:
        lines.append(f"creg c[{c.n_clbits}];")
    for inst in c.instructions:
        if isinstance(inst, Gate):
            p = f"({inst.param!r})" if inst.param is not None else ""
            args = ",".join(f"q[{q}]" for q in inst.qubits)
            lines.append(f"{inst.kind.value}{p} {args};")
        elif isinstance(inst, Barrier):
            args = ",".join(f"q[{q}]" for q in sorted(inst.qubits))
            tag = f" // tag:{inst.tag}" if inst.tag else ""
            lines.append(f"barrier {args};{tag}")
        else:
            lines.append(f"measure q[{inst.qubit}] -> c[{inst.clbit}];")
    return "\n".join(lines) + "\n"


def load(path: str | os.PathLike) -> Circuit:
    return parse(Path(path).read_text(encoding="utf-8"))


def dump(c: Circuit, path: str | os.PathLike) -> None:
    atomic_write(path, emit(c))


def atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- sidecar ----------------------------------------------------------------

@dataclass(frozen=True)
class SidecarRecord:
    """Everything the owner needs to undo an obfuscation; never sent to the compiler."""

    record: "ObfuscationRecord"  # noqa: F821
    initial_layout: tuple[int, ...] | None = None
    final_layout: tuple[int, ...] | None = None
    seeds: dict = field(default_factory=dict)
    toolkit: str = __version__

    def to_dict(self) -> dict:
        return {
            "v": SIDECAR_VERSION,
            "toolkit": self.toolkit,
            "record": self.record.to_dict(),
            "layout": {
                "initial": list(self.initial_layout) if self.initial_layout is not None else None,
                "final": list(self.final_layout) if self.final_layout is not None else None,
            },
            "seeds": {k: int(v) for k, v in sorted(self.seeds.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SidecarRecord":
        from .obfuscator import ObfuscationRecord

        if not isinstance(d, dict) or "v" not in d:
            raise SchemaVersionMismatch("sidecar has no schema version")
        if d["v"] != SIDECAR_VERSION:
            raise SchemaVersionMismatch(f"sidecar schema v{d['v']}, expected v{SIDECAR_VERSION}")
        try:
            layout = d["layout"]
            return cls(
                record=ObfuscationRecord.from_dict(d["record"]),
                initial_layout=tuple(layout["initial"]) if layout["initial"] is not None else None,
                final_layout=tuple(layout["final"]) if layout["final"] is not None else None,
                seeds=dict(d["seeds"]),
                toolkit=d["toolkit"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise RecordFormatError(f"malformed sidecar: {exc}") from exc


def dumps_record(sidecar: SidecarRecord) -> str:
    return json.dumps(sidecar.to_dict(), sort_keys=True, indent=2) + "\n"


def loads_record(text: str) -> SidecarRecord:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise RecordFormatError(f"sidecar is not valid JSON: {exc}") from exc
    return SidecarRecord.from_dict(d)


def save_record(sidecar: SidecarRecord, path: str | os.PathLike) -> SidecarRecord:
    atomic_write(path, dumps_record(sidecar))
    return sidecar


def load_record(path: str | os.PathLike) -> SidecarRecord:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise QasmError(f"cannot read sidecar {path}: {exc}") from exc
    return loads_record(text)
