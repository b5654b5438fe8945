# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled pairwise-interaction kernels.

Hot O(N^2) drift sums for the builtin y-dependent kernels.  The accumulation
contract matches :mod:`mkvlab._purecore` exactly: one Kahan compensation per
(target, component), source atoms consumed in ascending index order.  Targets
are processed in fixed tiles so the inner loop vectorises without changing
any per-target arithmetic.
"""

from libc.math cimport tanh

COMPILED = True

# Kernel ids shared with kernels.py (native_id field).
#   1: mean-field OU,        b(t, x, y) = y - x         (componentwise)
#   2: bounded tanh pull,    b(t, x, y) = a * tanh(y - x)

DEF TILE = 64


cdef void _ou_tile(const double[:, ::1] xs, const double[:, ::1] ys,
                   const double[::1] ws, double[:, ::1] out,
                   Py_ssize_t start, Py_ssize_t stop) noexcept nogil:
    cdef Py_ssize_t d = xs.shape[1]
    cdef Py_ssize_t m = ys.shape[0]
    cdef Py_ssize_t i0, iw, ii, j, k
    cdef double acc[TILE]
    cdef double comp[TILE]
    cdef double wj, yjk, term, y, s
    for i0 in range(start, stop, TILE):
        iw = stop - i0
        if iw > TILE:
            iw = TILE
        for k in range(d):
            for ii in range(iw):
                acc[ii] = 0.0
                comp[ii] = 0.0
            for j in range(m):
                wj = ws[j]
                yjk = ys[j, k]
                for ii in range(iw):
                    term = wj * (yjk - xs[i0 + ii, k])
                    y = term - comp[ii]
                    s = acc[ii] + y
                    comp[ii] = (s - acc[ii]) - y
                    acc[ii] = s
            for ii in range(iw):
                out[i0 + ii, k] = acc[ii]


cdef void _tanh_tile(double a, const double[:, ::1] xs, const double[:, ::1] ys,
                     const double[::1] ws, double[:, ::1] out,
                     Py_ssize_t start, Py_ssize_t stop) noexcept nogil:
    cdef Py_ssize_t d = xs.shape[1]
    cdef Py_ssize_t m = ys.shape[0]
    cdef Py_ssize_t i0, iw, ii, j, k
    cdef double acc[TILE]
    cdef double comp[TILE]
    cdef double wj, yjk, term, y, s
    for i0 in range(start, stop, TILE):
        iw = stop - i0
        if iw > TILE:
            iw = TILE
        for k in range(d):
            for ii in range(iw):
                acc[ii] = 0.0
                comp[ii] = 0.0
            for j in range(m):
                wj = ws[j]
                yjk = ys[j, k]
                for ii in range(iw):
                    term = wj * (a * tanh(yjk - xs[i0 + ii, k]))
                    y = term - comp[ii]
                    s = acc[ii] + y
                    comp[ii] = (s - acc[ii]) - y
                    acc[ii] = s
            for ii in range(iw):
                out[i0 + ii, k] = acc[ii]


def drift_pair_sum(int kernel_id, const double[::1] params, double t,
                   const double[:, ::1] xs, const double[:, ::1] ys,
                   const double[::1] ws, double[:, ::1] out,
                   Py_ssize_t start, Py_ssize_t stop):
    """Fill rows [start, stop) of ``out`` with sum_j ws[j] * b(t, xs[i], ys[j]).

    Releases the GIL, so disjoint row ranges may run on worker threads.
    """
    if xs.shape[1] != ys.shape[1] or xs.shape[1] != out.shape[1]:
        raise ValueError("dimension mismatch between xs, ys, out")
    if ys.shape[0] != ws.shape[0]:
        raise ValueError("weights length does not match source count")
    if start < 0 or stop > xs.shape[0] or stop > out.shape[0]:
        raise ValueError("row range out of bounds")
    if kernel_id == 1:
        with nogil:
            _ou_tile(xs, ys, ws, out, start, stop)
    elif kernel_id == 2:
        if params.shape[0] < 1:
            raise ValueError("tanh kernel needs its strength parameter")
        with nogil:
            _tanh_tile(params[0], xs, ys, ws, out, start, stop)
    else:
        raise ValueError(f"unknown native kernel id {kernel_id}")
