# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernels; same signatures as ``_pykernels``."""
from libc.stdint cimport uint64_t, int64_t

OP_MCX = 0
OP_SWAP = 1


def apply_1q(double complex[:, ::1] state, int q, double complex m00,
             double complex m01, double complex m10, double complex m11):
    cdef Py_ssize_t dim = state.shape[0], batch = state.shape[1]
    cdef Py_ssize_t step = (<Py_ssize_t>1) << q, blk, j, b
    cdef Py_ssize_t nblk = dim >> (q + 1), span = step * batch
    cdef double complex* base = &state[0, 0]
    cdef double complex* p0
    cdef double complex* p1
    cdef double complex a0, a1
    with nogil:
        for blk in range(nblk):
            p0 = base + 2 * blk * span
            p1 = p0 + span
            for j in range(span):
                a0 = p0[j]
                a1 = p1[j]
                p0[j] = m00 * a0 + m01 * a1
                p1[j] = m10 * a0 + m11 * a1


def apply_diag(double complex[:, ::1] state, int q, double complex d0, double complex d1):
    cdef Py_ssize_t dim = state.shape[0], batch = state.shape[1]
    cdef Py_ssize_t step = (<Py_ssize_t>1) << q, blk, j
    cdef Py_ssize_t nblk = dim >> (q + 1), span = step * batch
    cdef double complex* base = &state[0, 0]
    cdef double complex* p0
    cdef double complex* p1
    cdef bint scale0 = d0 != 1
    with nogil:
        for blk in range(nblk):
            p0 = base + 2 * blk * span
            p1 = p0 + span
            for j in range(span):
                p1[j] = p1[j] * d1
            if scale0:
                for j in range(span):
                    p0[j] = p0[j] * d0


def apply_mcx(double complex[:, ::1] state, uint64_t ctrl_mask, int target):
    cdef Py_ssize_t dim = state.shape[0], batch = state.shape[1]
    cdef uint64_t tbit = (<uint64_t>1) << target
    cdef Py_ssize_t i, b, i1
    cdef double complex* base = &state[0, 0]
    cdef double complex tmp
    with nogil:
        for i in range(dim):
            if (i & ctrl_mask) == ctrl_mask and not (i & tbit):
                i1 = i | tbit
                for b in range(batch):
                    tmp = base[i * batch + b]
                    base[i * batch + b] = base[i1 * batch + b]
                    base[i1 * batch + b] = tmp


def apply_swap(double complex[:, ::1] state, int a, int b_):
    cdef Py_ssize_t dim = state.shape[0], batch = state.shape[1]
    cdef uint64_t ba = (<uint64_t>1) << a, bb = (<uint64_t>1) << b_
    cdef Py_ssize_t i, b, i1
    cdef double complex* base = &state[0, 0]
    cdef double complex tmp
    with nogil:
        for i in range(dim):
            if (i & ba) and not (i & bb):
                i1 = (i ^ ba) | bb
                for b in range(batch):
                    tmp = base[i * batch + b]
                    base[i * batch + b] = base[i1 * batch + b]
                    base[i1 * batch + b] = tmp


def classical_run(uint64_t[::1] states, int64_t[:, ::1] ops, int64_t[::1] ev_ptr,
                  int64_t[::1] ev_shot, uint64_t[::1] ev_mask):
    cdef Py_ssize_t n_shots = states.shape[0], n_ops = ops.shape[0]
    cdef Py_ssize_t k, s, e
    cdef int64_t code
    cdef uint64_t cm, x, st, one = 1
    cdef int tb, pa, pb
    with nogil:
        for k in range(n_ops):
            code = ops[k, 0]
            if code == 0:
                cm = <uint64_t>ops[k, 1]
                tb = <int>ops[k, 2]
                for s in range(n_shots):
                    st = states[s]
                    if (st & cm) == cm:
                        states[s] = st ^ (one << tb)
            else:
                pa = <int>ops[k, 1]
                pb = <int>ops[k, 2]
                for s in range(n_shots):
                    st = states[s]
                    x = ((st >> pa) ^ (st >> pb)) & one
                    states[s] = st ^ ((x << pa) | (x << pb))
            for e in range(ev_ptr[k], ev_ptr[k + 1]):
                states[ev_shot[e]] ^= ev_mask[e]
