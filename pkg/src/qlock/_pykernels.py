"""Numpy implementations of the simulation kernels.

Used when the compiled ``_ckernels`` extension is unavailable, and as the
reference the extension is benchmarked and tested against. All state
arguments are complex128 arrays of shape ``(2**n, batch)`` modified in place.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

OP_MCX = 0
OP_SWAP = 1


def apply_1q(state: np.ndarray, q: int, m00: complex, m01: complex, m10: complex, m11: complex) -> None:
    dim, batch = state.shape
    v = state.reshape(dim >> (q + 1), 2, 1 << q, batch)
    s0 = v[:, 0].copy()
    s1 = v[:, 1]
    v[:, 0] = m00 * s0 + m01 * s1
    v[:, 1] = m10 * s0 + m11 * s1


def apply_diag(state: np.ndarray, q: int, d0: complex, d1: complex) -> None:
    dim, batch = state.shape
    v = state.reshape(dim >> (q + 1), 2, 1 << q, batch)
    if d0 != 1:
        v[:, 0] *= d0
    v[:, 1] *= d1


@lru_cache(maxsize=512)
def _mcx_pairs(dim: int, ctrl_mask: int, target: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(dim, dtype=np.int64)
    tbit = 1 << target
    sel = ((idx & ctrl_mask) == ctrl_mask) & ((idx & tbit) == 0)
    i0 = idx[sel]
    return i0, i0 | tbit


@lru_cache(maxsize=512)
def _swap_pairs(dim: int, a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(dim, dtype=np.int64)
    ba, bb = 1 << a, 1 << b
    i0 = idx[((idx & ba) != 0) & ((idx & bb) == 0)]
    return i0, (i0 ^ ba) | bb


def apply_mcx(state: np.ndarray, ctrl_mask: int, target: int) -> None:
    i0, i1 = _mcx_pairs(state.shape[0], ctrl_mask, target)
    state[np.concatenate([i0, i1])] = state[np.concatenate([i1, i0])]


def apply_swap(state: np.ndarray, a: int, b: int) -> None:
    i0, i1 = _swap_pairs(state.shape[0], a, b)
    state[np.concatenate([i0, i1])] = state[np.concatenate([i1, i0])]


def classical_run(
    states: np.ndarray,
    ops: np.ndarray,
    ev_ptr: np.ndarray,
    ev_shot: np.ndarray,
    ev_mask: np.ndarray,
) -> None:
    """Evolve per-shot bit vectors through permutation gates.

    ``ops[k] = (code, a, b)``: for ``OP_MCX`` ``a`` is the control mask and
    ``b`` the target bit position; for ``OP_SWAP`` ``a``/``b`` are bit
    positions. After op ``k`` the events ``ev_ptr[k]:ev_ptr[k+1]`` xor
    ``ev_mask`` into ``states[ev_shot]``.
    """
    one = np.uint64(1)
    for k in range(ops.shape[0]):
        code, a, b = (int(x) for x in ops[k])
        if code == OP_MCX:
            cm = np.uint64(a)
            hit = (states & cm) == cm
            states ^= hit.astype(np.uint64) << np.uint64(b)
        else:
            ua, ub = np.uint64(a), np.uint64(b)
            x = ((states >> ua) ^ (states >> ub)) & one
            states ^= (x << ua) | (x << ub)
        s, e = ev_ptr[k], ev_ptr[k + 1]
        if e > s:
            np.bitwise_xor.at(states, ev_shot[s:e], ev_mask[s:e])
