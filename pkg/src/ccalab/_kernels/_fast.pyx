# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the per-replicate hot kernels.

Single fused pass per row, GIL released; outputs are bit-identical to the
NumPy reference in ``_purepy`` because both transform the same pre-generated
uniform blocks with the same arithmetic.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()


def simulate_columns(double[::1] intercepts, double[::1] term_coefs, int[::1] term_bounds,
                     int[::1] factor_vars, int[::1] factor_bounds, int[::1] gate,
                     double[:, ::1] uniforms):
    cdef Py_ssize_t n_vars = uniforms.shape[0]
    cdef Py_ssize_t n = uniforms.shape[1]
    out_arr = np.empty((n_vars, n), dtype=np.int8)
    cdef signed char[:, ::1] out = out_arr
    cdef Py_ssize_t i, v, t, k
    cdef double p, prod
    cdef int g
    with nogil:
        for i in range(n):
            for v in range(n_vars):
                g = gate[v]
                if g >= 0 and out[g, i] != 1:
                    out[v, i] = -1
                    continue
                p = intercepts[v]
                for t in range(term_bounds[v], term_bounds[v + 1]):
                    prod = term_coefs[t]
                    for k in range(factor_bounds[t], factor_bounds[t + 1]):
                        prod *= out[factor_vars[k], i]
                    p += prod
                out[v, i] = 1 if uniforms[v, i] < p else 0
    return out_arr


def eval_formula(double intercept, double[::1] coefs, int[::1] factor_vars,
                 int[::1] factor_bounds, signed char[:, ::1] values):
    cdef Py_ssize_t n = values.shape[1]
    cdef Py_ssize_t n_terms = coefs.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, t, k
    cdef double p, prod
    with nogil:
        for i in range(n):
            p = intercept
            for t in range(n_terms):
                prod = coefs[t]
                for k in range(factor_bounds[t], factor_bounds[t + 1]):
                    prod *= values[factor_vars[k], i]
                p += prod
            out[i] = p
    return out_arr


def cell_codes(signed char[:, ::1] values, missing):
    cdef Py_ssize_t n_vars = values.shape[0]
    cdef Py_ssize_t n = values.shape[1]
    out_arr = np.zeros(n, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef cnp.uint8_t[::1] miss_view
    cdef Py_ssize_t i, v
    cdef long long code, scale
    cdef bint has_miss = missing is not None
    if has_miss:
        miss_view = np.ascontiguousarray(missing, dtype=np.uint8)
    else:
        miss_view = np.empty(0, dtype=np.uint8)
    with nogil:
        for i in range(n):
            code = 0
            scale = 1
            for v in range(n_vars):
                code += (values[v, i] + 1) * scale
                scale *= 3
            if has_miss and miss_view[i]:
                code += scale
            out[i] = code
    return out_arr
