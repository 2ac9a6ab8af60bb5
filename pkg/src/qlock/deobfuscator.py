"""Undo an obfuscation after compilation.

The inverse block is compiled separately and joined to the compiled
obfuscated circuit so that qubit layouts agree at the junction, either by
feeding the junction layout into the inverse's compilation or by bridging
with a layer of SWAPs.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .circuit import Barrier, Circuit, Gate, GateKind, Instruction, Measure, inverse
from .compiler import (
    CompiledCircuit,
    CompileOptions,
    CouplingMap,
    DisconnectedMap,
    Layout,
    compile,
    default_map,
    optimize_virtual,
    translate_basis,
)
from .obfuscator import ID_KEY, ObfuscationRecord


class DeobfuscationError(ValueError):
    pass


class RecordMismatch(DeobfuscationError):
    pass


class MissingBarrierTag(DeobfuscationError):
    pass


class StitchMode(enum.Enum):
    FEED_LAYOUT = "feed"
    SWAP_LAYER = "swap"

    @classmethod
    def parse(cls, text: str) -> "StitchMode":
        aliases = {"feed": cls.FEED_LAYOUT, "feedlayout": cls.FEED_LAYOUT, "feed-layout": cls.FEED_LAYOUT,
                   "swap": cls.SWAP_LAYER, "swaplayer": cls.SWAP_LAYER, "swap-layer": cls.SWAP_LAYER}
        try:
            return aliases[text.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown stitch mode {text!r}; use feed or swap") from None


def build_inverse(record: ObfuscationRecord) -> Circuit:
    return inverse(record.block)


# -- swap layers -----------------------------------------------------------

def _spanning_tree(cmap: CouplingMap) -> dict[int, set[int]]:
    tree: dict[int, set[int]] = {p: set() for p in range(cmap.n_physical)}
    seen = {0}
    frontier = [0]
    while frontier:
        nxt = []
        for p in frontier:
            for nb in cmap.neighbors(p):
                if nb not in seen:
                    seen.add(nb)
                    tree[p].add(nb)
                    tree[nb].add(p)
                    nxt.append(nb)
        frontier = nxt
    if len(seen) != cmap.n_physical:
        raise DisconnectedMap("coupling map is not connected")
    return tree


def _tree_path(tree: dict[int, set[int]], a: int, b: int) -> list[int]:
    parent = {a: None}
    stack = [a]
    while stack:
        p = stack.pop()
        for nb in sorted(tree[p]):
            if nb not in parent:
                parent[nb] = p
                stack.append(nb)
    path = [b]
    while path[-1] != a:
        path.append(parent[path[-1]])
    return path[::-1]


def swap_sequence(src: Layout, dst: Layout, cmap: CouplingMap) -> list[tuple[int, int]]:
    """Edges to swap, in order, so the placement ``src`` becomes ``dst``.

    Token swapping on a spanning tree: repeatedly settle the lowest-index
    leaf by walking its token in along the tree path, then drop the leaf.
    """
    if src.n_physical != cmap.n_physical or dst.n_physical != cmap.n_physical:
        raise DeobfuscationError("layouts do not match the coupling map")
    tree = _spanning_tree(cmap)
    token_at = list(src.p2v_full)  # physical -> label currently there
    where = list(src.v2p)  # label -> physical
    swaps: list[tuple[int, int]] = []
    while len(tree) > 1:
        leaf = min(p for p, nbs in tree.items() if len(nbs) <= 1)
        label = dst.p2v_full[leaf]
        path = _tree_path(tree, where[label], leaf)
        for a, b in zip(path, path[1:]):
            swaps.append((a, b))
            ta, tb = token_at[a], token_at[b]
            token_at[a], token_at[b] = tb, ta
            where[ta], where[tb] = b, a
        for nb in tree.pop(leaf):
            tree[nb].discard(leaf)
    return swaps


def swap_layer(src: Layout, dst: Layout, cmap: CouplingMap) -> Circuit:
    """SWAP-only circuit on coupling edges taking layout ``src`` to ``dst``."""
    gates = [Gate(GateKind.SWAP, edge) for edge in swap_sequence(src, dst, cmap)]
    return Circuit(cmap.n_physical, 0, gates)


# -- stitching -------------------------------------------------------------

@dataclass(frozen=True)
class StitchResult:
    circuit: Circuit
    initial_layout: Layout
    final_layout: Layout
    mode: StitchMode
    junction_swaps: int
    inverse_gates: int
    obfuscated_gates: int

    def compiled(self) -> CompiledCircuit:
        return CompiledCircuit(self.circuit, self.initial_layout, self.final_layout)

    def report(self) -> dict:
        return {
            "mode": self.mode.value,
            "junction_swaps": self.junction_swaps,
            "gate_counts": {
                "compiled_obfuscated": self.obfuscated_gates,
                "compiled_inverse": self.inverse_gates,
                "restored": self.circuit.gate_count(),
            },
            "initial_layout": self.initial_layout.to_list(),
            "final_layout": self.final_layout.to_list(),
            "n_virtual": self.initial_layout.n_virtual,
        }


def _invert_compiled(c: Circuit) -> Circuit:
    """Exact inverse of a basis-level circuit, translated back into the basis."""
    return translate_basis(inverse(c))


def _bridge(src: Layout, dst: Layout, cmap: CouplingMap) -> list[Instruction]:
    return list(translate_basis(swap_layer(src, dst, cmap)).instructions)


def _remap_measures(measures: list[Measure], before: Layout, after: Layout) -> list[Measure]:
    p2v = before.p2v_full
    return [Measure(after.v2p[p2v[m.qubit]], m.clbit) for m in measures]


def check_record(compiled: CompiledCircuit, record: ObfuscationRecord) -> None:
    found = compiled.circuit.metadata.get(ID_KEY)
    if found is None:
        raise RecordMismatch("compiled circuit carries no id to check the record against")
    if found != record.fingerprint():
        raise RecordMismatch("record does not belong to this compiled circuit")
    if record.block.n_qubits != compiled.initial_layout.n_virtual:
        raise RecordMismatch("record and compiled circuit disagree on the number of qubits")


def deobfuscate(
    compiled: CompiledCircuit,
    record: ObfuscationRecord,
    cmap: CouplingMap | None = None,
    mode: StitchMode = StitchMode.FEED_LAYOUT,
    *,
    verify: bool = True,
    reoptimize: bool = False,
) -> StitchResult:
    """Join the compiled inverse block to ``compiled`` and restore the original function."""
    if verify:
        check_record(compiled, record)
    cmap = cmap or compiled.coupling_map or default_map(compiled.initial_layout.n_virtual)
    n_virtual = compiled.initial_layout.n_virtual
    inv = build_inverse(record).replace(n_qubits=n_virtual)
    insts = list(compiled.circuit.instructions)
    body = [i for i in insts if not isinstance(i, Measure)]
    measures = [i for i in insts if isinstance(i, Measure)]
    L_i, L_f = compiled.initial_layout, compiled.final_layout
    feed = mode is StitchMode.FEED_LAYOUT

    def compile_inverse(start: Layout | None) -> CompiledCircuit:
        opts = CompileOptions(initial_layout=start) if start is not None else CompileOptions(layout="trivial")
        return compile(inv, cmap, opts)

    swaps = 0
    if record.location.kind == "back":
        ci = compile_inverse(L_f if feed else None)
        bridge = [] if feed else _bridge(L_f, ci.initial_layout, cmap)
        swaps = len(bridge) // 3
        out = body + bridge + list(ci.circuit.instructions) + _remap_measures(measures, L_f, ci.final_layout)
        initial, final, n_inv = L_i, ci.final_layout, ci.circuit.gate_count()
    elif record.location.kind == "front":
        if feed:
            cb = compile(record.block.replace(n_qubits=n_virtual), cmap, CompileOptions(initial_layout=L_i))
            head = list(_invert_compiled(cb.circuit).instructions)
            initial, n_inv = cb.final_layout, len(head)
        else:
            ci = compile_inverse(None)
            bridge = _bridge(ci.final_layout, L_i, cmap)
            swaps = len(bridge) // 3
            head = list(ci.circuit.instructions) + bridge
            initial, n_inv = ci.initial_layout, ci.circuit.gate_count()
        out = head + body + measures
        final = L_f
    else:
        tag = record.barrier_tag
        pos = next((k for k, i in enumerate(body) if isinstance(i, Barrier) and i.tag == tag), None)
        if tag is None or pos is None:
            raise MissingBarrierTag(f"tagged barrier {tag!r} not found in the compiled circuit")
        try:
            _, L_b = compiled.layout_at_tag(tag)
        except KeyError:
            raise MissingBarrierTag(f"no layout recorded at barrier {tag!r}") from None
        ci = compile_inverse(L_b if feed else None)
        pre = [] if feed else _bridge(L_b, ci.initial_layout, cmap)
        post = _bridge(ci.final_layout, L_b, cmap)
        swaps = (len(pre) + len(post)) // 3
        seg = pre + list(ci.circuit.instructions) + post
        cut = pos + 1 if record.location.side == "left" else pos
        out = body[:cut] + seg + body[cut:] + measures
        initial, final, n_inv = L_i, L_f, ci.circuit.gate_count()

    restored = compiled.circuit.replace(instructions=out)
    if reoptimize:
        restored = optimize_virtual(restored)
    return StitchResult(restored, initial, final, mode, swaps, n_inv, compiled.circuit.gate_count())
