# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Semantics mirror ``_fallback`` exactly."""

from libc.math cimport fabs
from libc.stdint cimport int64_t


def resolvent_sweep(const int64_t[:, ::1] neighbors, double coef,
                    const double[:, ::1] rhs,
                    const double[:, ::1] x_in, double[:, ::1] x_out,
                    double[::1] change):
    """One block fixed-point step ``x_out = coef * W @ x_in + rhs``.

    ``W`` has weight ``1/k`` on each listed neighbour, folded into
    ``coef``. ``change[c]`` receives ``max_i |x_out[i, c] - x_in[i, c]|``.
    """
    cdef Py_ssize_t n = neighbors.shape[0]
    cdef Py_ssize_t k = neighbors.shape[1]
    cdef Py_ssize_t m = x_in.shape[1]
    cdef Py_ssize_t i, a, c
    cdef int64_t j
    cdef double scale = coef / k
    cdef double diff
    with nogil:
        for c in range(m):
            change[c] = 0.0
        for i in range(n):
            for c in range(m):
                x_out[i, c] = 0.0
            for a in range(k):
                j = neighbors[i, a]
                for c in range(m):
                    x_out[i, c] += x_in[j, c]
            for c in range(m):
                x_out[i, c] = scale * x_out[i, c] + rhs[i, c]
                diff = fabs(x_out[i, c] - x_in[i, c])
                if diff > change[c]:
                    change[c] = diff
