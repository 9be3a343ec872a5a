# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled proposal sweep for the uniformized sequence simulator."""

cimport cython
from libc.stdint cimport int64_t, uint8_t


def sweep(uint8_t[::1] seq, const double[:, ::1] cum, const int64_t[::1] sites, const double[::1] levels):
    """Apply proposals in order; return the number accepted.

    ``cum[16 * left + 4 * x + right]`` holds cumulative rates over the four
    targets. A proposal at site ``i`` with level ``u`` moves the site to the
    first target whose cumulative rate exceeds ``u``, if any.
    """
    cdef Py_ssize_t n = seq.shape[0]
    cdef Py_ssize_t k, m = sites.shape[0]
    cdef Py_ssize_t i, ctx
    cdef int y
    cdef double u
    cdef long accepted = 0
    for k in range(m):
        i = sites[k]
        u = levels[k]
        ctx = 16 * seq[n - 1 if i == 0 else i - 1] + 4 * seq[i] + seq[0 if i == n - 1 else i + 1]
        if u >= cum[ctx, 3]:
            continue
        y = 0
        while u >= cum[ctx, y]:
            y += 1
        seq[i] = <uint8_t>y
        accepted += 1
    return accepted
