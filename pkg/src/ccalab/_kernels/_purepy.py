"""NumPy reference implementations of the per-replicate hot kernels.

These are the semantics of record: the compiled backend must produce
bit-identical outputs for identical inputs (both consume the same
pre-generated uniform blocks, so equality is exact, not approximate).

Value convention: binary variables are int8 with -1 meaning "structurally
undefined" (e.g. treatment/outcome outside the sampled trial).
"""
from __future__ import annotations

import numpy as np


def simulate_columns(intercepts, term_coefs, term_bounds, factor_vars, factor_bounds,
                     gate, uniforms):
    """Draw all variables of a formula program against a (V, n) uniform block.

    Variable v is 1 where uniforms[v] < p_v(earlier columns), 0 otherwise,
    and -1 on rows where its gate variable is not 1.
    """
    n_vars, n = uniforms.shape
    out = np.empty((n_vars, n), dtype=np.int8)
    for v in range(n_vars):
        p = np.full(n, intercepts[v])
        for t in range(term_bounds[v], term_bounds[v + 1]):
            prod = term_coefs[t] * out[factor_vars[factor_bounds[t]]]
            for k in range(factor_bounds[t] + 1, factor_bounds[t + 1]):
                prod = prod * out[factor_vars[k]]
            p += prod
        col = (uniforms[v] < p).astype(np.int8)
        g = gate[v]
        if g >= 0:
            col[out[g] != 1] = -1
        out[v] = col
    return out


def eval_formula(intercept, coefs, factor_vars, factor_bounds, values):
    """Row-wise value of one linear-probability formula over a (V, n) matrix."""
    n = values.shape[1]
    p = np.full(n, intercept)
    for t in range(len(coefs)):
        prod = coefs[t] * values[factor_vars[factor_bounds[t]]]
        for k in range(factor_bounds[t] + 1, factor_bounds[t + 1]):
            prod = prod * values[factor_vars[k]]
        p += prod
    return p


def cell_codes(values, missing):
    """Pack each row's assignment (base 3, digit = value + 1) plus an optional
    missing flag into one integer, for bincount aggregation."""
    n_vars, n = values.shape
    codes = np.zeros(n, dtype=np.int64)
    scale = 1
    for v in range(n_vars):
        codes += (values[v].astype(np.int64) + 1) * scale
        scale *= 3
    if missing is not None:
        codes += missing.astype(np.int64) * scale
    return codes
