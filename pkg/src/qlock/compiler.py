"""A deterministic stand-in for an untrusted transpiler.

Pipeline: virtual optimization, 3+-qubit decomposition, placement, SWAP
routing, basis translation to {id, rz, sx, x, cx}, physical optimization.
Barriers are never optimized across and survive every pass.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import (
    Barrier,
    Circuit,
    Gate,
    GateKind,
    Instruction,
    Measure,
    instruction_qubits,
)

PI = math.pi


class CompileError(ValueError):
    pass


class DisconnectedMap(CompileError):
    pass


class TooManyVirtualQubits(CompileError):
    pass


class UnexpectedGate(CompileError):
    pass


# -- coupling maps and layouts ---------------------------------------------

@dataclass(frozen=True)
class CouplingMap:
    n_physical: int
    edges: frozenset

    def __post_init__(self):
        norm = frozenset(tuple(sorted((int(a), int(b)))) for a, b in self.edges)
        for a, b in norm:
            if a == b or not (0 <= a < self.n_physical and 0 <= b < self.n_physical):
                raise ValueError(f"bad edge ({a}, {b}) for {self.n_physical} qubits")
        object.__setattr__(self, "edges", norm)

    def neighbors(self, p: int) -> list[int]:
        return sorted({b for a, b in self.edges if a == p} | {a for a, b in self.edges if b == p})

    def adjacent(self, a: int, b: int) -> bool:
        return tuple(sorted((a, b))) in self.edges

    def degree(self, p: int) -> int:
        return len(self.neighbors(p))

    def shortest_path(self, a: int, b: int) -> list[int]:
        """BFS path from ``a`` to ``b``; neighbours explored in index order."""
        parent = {a: None}
        queue = deque([a])
        while queue:
            p = queue.popleft()
            if p == b:
                break
            for nb in self.neighbors(p):
                if nb not in parent:
                    parent[nb] = p
                    queue.append(nb)
        if b not in parent:
            raise DisconnectedMap(f"no path between physical qubits {a} and {b}")
        path = [b]
        while path[-1] != a:
            path.append(parent[path[-1]])
        return path[::-1]

    def is_connected(self) -> bool:
        if self.n_physical <= 1:
            return True
        seen = {0}
        stack = [0]
        while stack:
            for nb in self.neighbors(stack.pop()):
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == self.n_physical

    def to_json(self) -> str:
        return json.dumps({"n": self.n_physical, "edges": sorted(list(e) for e in self.edges)})

    @classmethod
    def from_json(cls, text: str) -> "CouplingMap":
        d = json.loads(text)
        return cls(int(d["n"]), frozenset(tuple(e) for e in d["edges"]))

    @classmethod
    def valencia(cls) -> "CouplingMap":
        return cls(5, frozenset({(0, 1), (1, 2), (1, 3), (3, 4)}))

    @classmethod
    def line(cls, n: int) -> "CouplingMap":
        return cls(n, frozenset((i, i + 1) for i in range(n - 1)))


def default_map(n_qubits: int) -> CouplingMap:
    return CouplingMap.valencia() if n_qubits <= 5 else CouplingMap.line(n_qubits)


@dataclass(frozen=True)
class Layout:
    """Total placement of ``n_physical`` labels; labels ``>= n_virtual`` are ancillas.

    ``v2p[v]`` is the physical qubit holding virtual qubit ``v``.
    """

    v2p: tuple[int, ...]
    n_virtual: int

    def __post_init__(self):
        object.__setattr__(self, "v2p", tuple(int(p) for p in self.v2p))
        if sorted(self.v2p) != list(range(len(self.v2p))):
            raise ValueError(f"layout {self.v2p} is not a permutation")
        if not 0 <= self.n_virtual <= len(self.v2p):
            raise ValueError("n_virtual out of range")

    @property
    def n_physical(self) -> int:
        return len(self.v2p)

    @property
    def p2v_full(self) -> tuple[int, ...]:
        out = [0] * len(self.v2p)
        for v, p in enumerate(self.v2p):
            out[p] = v
        return tuple(out)

    @property
    def p2v(self) -> dict[int, int]:
        """Physical -> virtual for the real (non-ancilla) virtual qubits."""
        return {p: v for v, p in enumerate(self.v2p) if v < self.n_virtual}

    @classmethod
    def trivial(cls, n_virtual: int, n_physical: int | None = None) -> "Layout":
        return cls(tuple(range(n_physical or n_virtual)), n_virtual)

    @classmethod
    def from_p2v(cls, p2v: dict[int, int], n_virtual: int, n_physical: int) -> "Layout":
        v2p = [-1] * n_physical
        for p, v in p2v.items():
            v2p[v] = p
        free = iter(sorted(set(range(n_physical)) - set(p2v)))
        for v in range(n_physical):
            if v2p[v] < 0:
                v2p[v] = next(free)
        return cls(tuple(v2p), n_virtual)

    def swapped(self, a: int, b: int) -> "Layout":
        """Layout after a SWAP of physical qubits ``a`` and ``b``."""
        p2v = list(self.p2v_full)
        p2v[a], p2v[b] = p2v[b], p2v[a]
        v2p = [0] * len(p2v)
        for p, v in enumerate(p2v):
            v2p[v] = p
        return Layout(tuple(v2p), self.n_virtual)

    def physical_input(self, bits: str) -> str:
        """Map a virtual basis string onto physical qubits (ancillas start at 0)."""
        out = ["0"] * self.n_physical
        for v, ch in enumerate(bits):
            out[self.v2p[v]] = ch
        return "".join(out)

    def to_list(self) -> list[int]:
        return list(self.v2p)


@dataclass(frozen=True)
class CompiledCircuit:
    circuit: Circuit
    initial_layout: Layout
    final_layout: Layout
    pass_log: tuple = ()
    barrier_layouts: tuple = ()  # (barrier ordinal, tag, Layout) per barrier, in order
    coupling_map: CouplingMap | None = None

    def layout_at_tag(self, tag: str) -> tuple[int, Layout]:
        for ordinal, btag, layout in self.barrier_layouts:
            if btag == tag:
                return ordinal, layout
        raise KeyError(tag)

    def report(self) -> dict:
        return {
            "initial_layout": self.initial_layout.to_list(),
            "final_layout": self.final_layout.to_list(),
            "n_virtual": self.initial_layout.n_virtual,
            "pass_log": [{"pass": n, "before": b, "after": a} for n, b, a in self.pass_log],
            "barrier_layouts": [
                {"ordinal": o, "tag": t, "layout": l.to_list()} for o, t, l in self.barrier_layouts
            ],
            "coupling_map": json.loads(self.coupling_map.to_json()) if self.coupling_map else None,
            "gate_count": self.circuit.gate_count(),
        }

    @classmethod
    def from_report(cls, c: Circuit, report: dict) -> "CompiledCircuit":
        nv = int(report["n_virtual"])
        cmap = report.get("coupling_map")
        return cls(
            circuit=c,
            initial_layout=Layout(tuple(report["initial_layout"]), nv),
            final_layout=Layout(tuple(report["final_layout"]), nv),
            pass_log=tuple((e["pass"], e["before"], e["after"]) for e in report["pass_log"]),
            barrier_layouts=tuple(
                (e["ordinal"], e["tag"], Layout(tuple(e["layout"]), nv)) for e in report["barrier_layouts"]
            ),
            coupling_map=CouplingMap(cmap["n"], frozenset(tuple(e) for e in cmap["edges"])) if cmap else None,
        )


# -- optimization ----------------------------------------------------------

_ANGLE_EPS = 1e-12


def _same_support(a: Gate, b: Gate) -> bool:
    if a.qubits == b.qubits:
        return True
    if a.kind is b.kind is GateKind.SWAP:
        return set(a.qubits) == set(b.qubits)
    if a.kind is b.kind and a.kind in (GateKind.CCX, GateKind.C3X):
        return a.qubits[-1] == b.qubits[-1] and set(a.qubits[:-1]) == set(b.qubits[:-1])
    return False


def _combine(a: Gate, b: Gate):
    """``"cancel"``, a merged gate, or None if ``a`` then ``b`` do not simplify."""
    if not _same_support(a, b):
        return None
    if a.kind is GateKind.RZ and b.kind is GateKind.RZ:
        theta = a.param + b.param
        if abs(math.remainder(theta, 2 * PI)) < _ANGLE_EPS:
            return "cancel"
        return Gate(GateKind.RZ, a.qubits, theta)
    if a.kind.parametric or b.kind.parametric:
        return None
    if b.kind is a.kind.adjoint:
        return "cancel"
    return None


def _cancel_pass(c: Circuit) -> Circuit:
    out: list[Instruction | None] = []
    stacks: dict[int, list[int]] = {}
    for inst in c.instructions:
        qs = instruction_qubits(inst)
        if isinstance(inst, Gate):
            tops = {stacks[q][-1] if stacks.get(q) else None for q in qs}
            if len(tops) == 1:
                p = tops.pop()
                prev = out[p] if p is not None else None
                if isinstance(prev, Gate) and set(prev.qubits) == set(qs):
                    r = _combine(prev, inst)
                    if r == "cancel":
                        out[p] = None
                        for q in qs:
                            stacks[q].pop()
                        continue
                    if isinstance(r, Gate):
                        out[p] = r
                        continue
        out.append(inst)
        for q in qs:
            stacks.setdefault(q, []).append(len(out) - 1)
    return c.replace(instructions=[i for i in out if i is not None])


def optimize_virtual(c: Circuit) -> Circuit:
    """Cancel adjacent inverse pairs and merge RZ runs until nothing changes."""
    while True:
        nxt = _cancel_pass(c)
        if nxt.instructions == c.instructions:
            return nxt
        c = nxt


# -- decomposition ---------------------------------------------------------

def _g(kind: GateKind, *qubits: int, param: float | None = None) -> Gate:
    return Gate(kind, qubits, param)


def ccx_decomposition(a: int, b: int, t: int) -> list[Gate]:
    """Exact Toffoli with 6 CX and H/T/Tdg."""
    H, T, Tdg, CX = GateKind.H, GateKind.T, GateKind.Tdg, GateKind.CX
    return [
        _g(H, t), _g(CX, b, t), _g(Tdg, t), _g(CX, a, t), _g(T, t), _g(CX, b, t),
        _g(Tdg, t), _g(CX, a, t), _g(T, b), _g(T, t), _g(H, t), _g(CX, a, b),
        _g(T, a), _g(Tdg, b), _g(CX, a, b),
    ]


def cphase_decomposition(c: int, t: int, lam: float) -> list[Gate]:
    """diag(1, 1, 1, e^{i lam}) up to global phase."""
    RZ, CX = GateKind.RZ, GateKind.CX
    return [
        _g(RZ, c, param=lam / 2), _g(CX, c, t), _g(RZ, t, param=-lam / 2),
        _g(CX, c, t), _g(RZ, t, param=lam / 2),
    ]


def _controlled_xpow(c: int, t: int, lam: float) -> list[Gate]:
    # X^(lam/pi) controlled on c, as H . CP(lam) . H on the target
    return [_g(GateKind.H, t), *cphase_decomposition(c, t, lam), _g(GateKind.H, t)]


def c3x_decomposition(a: int, b: int, c: int, t: int) -> list[Gate]:
    """Ancilla-free C3X from controlled sqrt(X) and fourth-root-of-X pieces."""
    doubly_controlled_v = [
        *_controlled_xpow(b, t, PI / 4),
        _g(GateKind.CX, a, b),
        *_controlled_xpow(b, t, -PI / 4),
        _g(GateKind.CX, a, b),
        *_controlled_xpow(a, t, PI / 4),
    ]
    return [
        *_controlled_xpow(c, t, PI / 2),
        *ccx_decomposition(a, b, c),
        *_controlled_xpow(c, t, -PI / 2),
        *ccx_decomposition(a, b, c),
        *doubly_controlled_v,
    ]


def swap_decomposition(a: int, b: int) -> list[Gate]:
    return [_g(GateKind.CX, a, b), _g(GateKind.CX, b, a), _g(GateKind.CX, a, b)]


def decompose(c: Circuit) -> Circuit:
    """Rewrite CCX, C3X and SWAP so only 1-qubit gates and CX remain."""
    out: list[Instruction] = []
    for inst in c.instructions:
        if isinstance(inst, Gate):
            if inst.kind is GateKind.CCX:
                out.extend(ccx_decomposition(*inst.qubits))
                continue
            if inst.kind is GateKind.C3X:
                out.extend(c3x_decomposition(*inst.qubits))
                continue
            if inst.kind is GateKind.SWAP:
                out.extend(swap_decomposition(*inst.qubits))
                continue
        out.append(inst)
    return c.replace(instructions=out)


# -- placement and routing -------------------------------------------------

def _interaction_degree(c: Circuit) -> list[int]:
    deg = [0] * c.n_qubits
    for g in c.gates:
        if g.kind.arity >= 2:
            for q in g.qubits:
                deg[q] += 1
    return deg


def _all_adjacent(c: Circuit, cmap: CouplingMap) -> bool:
    for g in c.gates:
        if g.kind.arity > 2:
            return False
        if g.kind.arity == 2 and not cmap.adjacent(*g.qubits):
            return False
    return True


def place(c: Circuit, cmap: CouplingMap, strategy: str = "greedy") -> Layout:
    """Initial layout.

    ``trivial`` maps virtual ``v`` to physical ``v``. ``greedy`` keeps the
    trivial layout when it already satisfies every 2-qubit gate; otherwise it
    pairs virtual qubits by descending interaction degree with physical qubits
    by descending coupling degree, ties broken by index.
    """
    n, N = c.n_qubits, cmap.n_physical
    if n > N:
        raise TooManyVirtualQubits(f"{n} virtual qubits do not fit {N} physical qubits")
    if strategy == "trivial" or (strategy == "greedy" and _all_adjacent(c, cmap)):
        return Layout.trivial(n, N)
    if strategy != "greedy":
        raise ValueError(f"unknown placement strategy {strategy!r}")
    deg = _interaction_degree(c)
    virtuals = sorted(range(n), key=lambda v: (-deg[v], v))
    physicals = sorted(range(N), key=lambda p: (-cmap.degree(p), p))
    return Layout.from_p2v({p: v for v, p in zip(virtuals, physicals)}, n, N)


def _route(c: Circuit, cmap: CouplingMap, initial: Layout):
    if not cmap.is_connected():
        raise DisconnectedMap("coupling map is not connected")
    if initial.n_physical != cmap.n_physical:
        raise CompileError("layout size does not match the coupling map")
    if c.n_qubits > initial.n_virtual:
        raise CompileError("layout has fewer virtual qubits than the circuit")
    layout = initial
    out: list[Instruction] = []
    measures: list[Measure] = []
    barrier_layouts = []
    for inst in c.instructions:
        if isinstance(inst, Measure):
            measures.append(inst)
            continue
        if isinstance(inst, Barrier):
            barrier_layouts.append((len(barrier_layouts), inst.tag, layout))
            out.append(Barrier(frozenset(layout.v2p[q] for q in inst.qubits), inst.tag))
            continue
        if inst.kind.arity > 2:
            raise UnexpectedGate(f"route needs 1- and 2-qubit gates, got {inst.kind.value}")
        if inst.kind.arity == 2:
            pa, pb = (layout.v2p[q] for q in inst.qubits)
            if not cmap.adjacent(pa, pb):
                path = cmap.shortest_path(pa, pb)
                for i in range(len(path) - 2):
                    out.append(Gate(GateKind.SWAP, (path[i], path[i + 1])))
                    layout = layout.swapped(path[i], path[i + 1])
        out.append(Gate(inst.kind, tuple(layout.v2p[q] for q in inst.qubits), inst.param))
    for m in measures:
        out.append(Measure(layout.v2p[m.qubit], m.clbit))
    routed = Circuit(cmap.n_physical, c.n_clbits, out, c.metadata)
    return routed, layout, tuple(barrier_layouts)


def route(c: Circuit, cmap: CouplingMap, initial: Layout) -> tuple[Circuit, Layout]:
    """Insert SWAPs along BFS shortest paths so every 2-qubit gate sits on an edge.

    Measurements are moved to the end and retargeted through the final layout.
    """
    routed, final, _ = _route(c, cmap, initial)
    return routed, final


# -- basis translation -----------------------------------------------------

_BASIS = {GateKind.I, GateKind.RZ, GateKind.SX, GateKind.X, GateKind.CX}


def _translate_gate(g: Gate) -> list[Gate]:
    q = g.qubits[0]
    RZ, SX = GateKind.RZ, GateKind.SX
    k = g.kind
    if k in _BASIS:
        return [g]
    if k is GateKind.H:
        return [_g(RZ, q, param=PI / 2), _g(SX, q), _g(RZ, q, param=PI / 2)]
    if k is GateKind.S:
        return [_g(RZ, q, param=PI / 2)]
    if k is GateKind.Sdg:
        return [_g(RZ, q, param=-PI / 2)]
    if k is GateKind.T:
        return [_g(RZ, q, param=PI / 4)]
    if k is GateKind.Tdg:
        return [_g(RZ, q, param=-PI / 4)]
    if k is GateKind.SXdg:
        return [_g(RZ, q, param=PI), _g(SX, q), _g(RZ, q, param=PI)]
    if k is GateKind.SWAP:
        return swap_decomposition(*g.qubits)
    raise UnexpectedGate(f"cannot translate {k.value}; decompose first")


def translate_basis(c: Circuit) -> Circuit:
    """Rewrite into {id, rz, sx, x, cx}; equal to the input up to global phase."""
    out: list[Instruction] = []
    for inst in c.instructions:
        if isinstance(inst, Gate):
            out.extend(_translate_gate(inst))
        else:
            out.append(inst)
    return c.replace(instructions=out)


# -- full pipeline ---------------------------------------------------------

@dataclass(frozen=True)
class CompileOptions:
    layout: str = "greedy"
    initial_layout: Layout | None = None
    optimize: bool = True


def compile(c: Circuit, cmap: CouplingMap | None = None, options: CompileOptions | None = None) -> CompiledCircuit:
    cmap = cmap or default_map(c.n_qubits)
    options = options or CompileOptions()
    log = []

    def step(name, fn, circ):
        before = circ.gate_count()
        result = fn(circ)
        log.append((name, before, result.gate_count()))
        return result

    cur = step("optimize_virtual", optimize_virtual, c) if options.optimize else c
    cur = step("decompose", decompose, cur)
    if options.initial_layout is not None:
        initial = options.initial_layout
        if initial.n_physical != cmap.n_physical:
            raise CompileError("initial layout does not match the coupling map")
        if c.n_qubits > initial.n_virtual:
            raise TooManyVirtualQubits("initial layout is too small for the circuit")
    else:
        initial = place(cur, cmap, options.layout)
    routed, final, barrier_layouts = _route(cur, cmap, initial)
    log.append(("route", cur.gate_count(), routed.gate_count()))
    cur = step("translate_basis", translate_basis, routed)
    if options.optimize:
        cur = step("optimize_physical", optimize_virtual, cur)
    return CompiledCircuit(cur, initial, final, tuple(log), barrier_layouts, cmap)


# -- layout-aware equivalence oracle ---------------------------------------

def layout_permutation(layout: Layout) -> np.ndarray:
    """Matrix sending virtual basis ``x`` to the physical basis it occupies."""
    N = layout.n_physical
    dim = 1 << N
    perm = np.zeros((dim, dim))
    for x in range(dim):
        y = 0
        for v in range(N):
            if (x >> v) & 1:
                y |= 1 << layout.v2p[v]
        perm[y, x] = 1.0
    return perm


def compiled_distance(original: Circuit, compiled: Circuit, initial: Layout, final: Layout) -> float:
    """max-entry deviation of ``V P_init`` from ``e^{i phi} P_final (U x I)``."""
    from .simulator import phase_aligned_distance, unitary_of

    N = initial.n_physical
    u = unitary_of(original.without_measures())
    u_ext = np.kron(np.eye(1 << (N - original.n_qubits)), u)
    v = unitary_of(compiled.without_measures())
    return phase_aligned_distance(v @ layout_permutation(initial), layout_permutation(final) @ u_ext)
