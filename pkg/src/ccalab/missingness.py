"""Scoped missingness in a single covariate.

One formula-driven mechanism covers all four canonical types; the type label
is derived from which variables the missingness probability actually depends
on, with precedence outcome > the target itself > any other variable > none.
Missingness applies only inside the scope (e.g. untreated units, or trial
units), matching designs where one side of the comparison is fully observed.

Both representations are supported with identical semantics: stochastic
masking of sampled rows, and an exact split of a probability table into
observed/missing layers via a complete-case indicator column.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._rng import uniform_block
from .dgp import Dataset, StratumTable, ValidatedSpec, encode_formula, _RANGE_EPS
from .errors import FormulaOutOfRange, RoleViolation, UnknownVariable
from .formula import LinearProbabilityFormula

COMPLETE_INDICATOR = "R"  # R = 1 marks a complete case

__all__ = [
    "MissingnessSpec",
    "COMPLETE_INDICATOR",
    "classify_mechanism",
    "validate_missingness",
    "apply_missingness",
    "extend_joint_with_missingness",
]


@dataclass(frozen=True)
class MissingnessSpec:
    """P(target missing) = formula(row) on rows matching every scope conjunct,
    0 elsewhere."""

    target: str
    formula: LinearProbabilityFormula
    scope: tuple[tuple[str, int], ...] = ()


def classify_mechanism(mspec: MissingnessSpec, spec: ValidatedSpec) -> int:
    """Type 4 if the probability tracks the outcome, 3 the target itself,
    2 any other variable, 1 if constant. Mixed formulas take the highest."""
    predictors = set(mspec.formula.predictors())
    if spec.outcome in predictors:
        return 4
    if mspec.target in predictors:
        return 3
    if predictors:
        return 2
    return 1


def validate_missingness(mspec: MissingnessSpec, spec: ValidatedSpec) -> None:
    """Check target role, variable references, scope values, and the formula's
    range over every reachable in-scope assignment of the exact joint."""
    if mspec.target not in spec.index_of:
        raise UnknownVariable(f"missingness target {mspec.target!r} is not defined")
    if mspec.target not in spec.covariates:
        raise RoleViolation(f"missingness target {mspec.target!r} must be a covariate")
    for name, value in mspec.scope:
        if name not in spec.index_of:
            raise UnknownVariable(f"scope references unknown variable {name!r}")
        if value not in (0, 1):
            raise RoleViolation(f"scope condition {name}={value} must use 0 or 1")
    for name in mspec.formula.referenced():
        if name not in spec.index_of:
            raise UnknownVariable(f"missingness formula references unknown {name!r}")

    joint = spec.joint()
    in_scope = _scope_rows(mspec, joint.variables, joint.assignments)
    if not in_scope.any():
        return  # nothing can ever go missing; formula value is never used
    probs = _formula_rows(mspec, joint.variables, joint.assignments)
    bad = in_scope & ~((probs >= -_RANGE_EPS) & (probs <= 1.0 + _RANGE_EPS))
    if bad.any():
        i = int(np.argmax(bad))
        shown = dict(zip(joint.variables, (int(a) for a in joint.assignments[i])))
        raise FormulaOutOfRange(
            f"P(missing) = {probs[i]:.6g} outside [0, 1] at {shown}"
        )


def _scope_rows(mspec, variables, values_by_row):
    keep = np.ones(len(values_by_row), dtype=bool)
    for name, value in mspec.scope:
        try:
            idx = variables.index(name)
        except ValueError:
            raise UnknownVariable(f"scope references unknown variable {name!r}") from None
        keep &= values_by_row[:, idx] == value
    return keep


def _formula_rows(mspec, variables, values_by_row):
    index_of = {n: i for i, n in enumerate(variables)}
    intercept, coefs, fvars, fbounds = encode_formula(mspec.formula, index_of)
    matrix = np.ascontiguousarray(values_by_row.T)
    return _kernels.eval_formula(intercept, coefs, fvars, fbounds, matrix)


def apply_missingness(data: Dataset, mspec: MissingnessSpec, seed: int) -> Dataset:
    """Mask the target wherever an in-scope row draws below its missingness
    probability. One uniform is drawn per row (in-scope or not) so the mask is
    a pure function of (data, mspec, seed)."""
    target_idx = data.index_of(mspec.target)
    index_of = {n: i for i, n in enumerate(data.variables)}
    intercept, coefs, fvars, fbounds = encode_formula(mspec.formula, index_of)
    probs = _kernels.eval_formula(intercept, coefs, fvars, fbounds, data.values)
    in_scope = np.ones(data.n, dtype=bool)
    for name, value in mspec.scope:
        in_scope &= data.values[data.index_of(name)] == value
    if in_scope.any():
        lo, hi = probs[in_scope].min(), probs[in_scope].max()
        if lo < -_RANGE_EPS or hi > 1.0 + _RANGE_EPS:
            raise FormulaOutOfRange(
                f"P(missing) ranges over [{lo:.6g}, {hi:.6g}] on in-scope rows"
            )
    draws = uniform_block(seed, data.n)
    newly_missing = in_scope & (draws < probs)
    mask = dict(data.mask)
    if mspec.target in mask:
        newly_missing = newly_missing | mask[mspec.target]
    mask[mspec.target] = newly_missing
    return Dataset(variables=data.variables, values=data.values, mask=mask)


def extend_joint_with_missingness(
    joint: StratumTable, mspec: MissingnessSpec, indicator: str = COMPLETE_INDICATOR
) -> StratumTable:
    """Split each cell into complete (R=1) and missing (R=0) layers.

    In-scope cells split their mass by the formula value; out-of-scope cells
    keep full mass at R=1. Total mass is preserved exactly; zero-mass layers
    are dropped.
    """
    if indicator in joint.variables:
        raise ValueError(f"indicator name {indicator!r} collides with a variable")
    in_scope = _scope_rows(mspec, joint.variables, joint.assignments)
    p_miss = _formula_rows(mspec, joint.variables, joint.assignments)
    bad = in_scope & ~((p_miss >= -_RANGE_EPS) & (p_miss <= 1.0 + _RANGE_EPS))
    if bad.any():
        i = int(np.argmax(bad))
        shown = dict(zip(joint.variables, (int(a) for a in joint.assignments[i])))
        raise FormulaOutOfRange(f"P(missing) = {p_miss[i]:.6g} outside [0, 1] at {shown}")
    p_miss = np.clip(np.where(in_scope, p_miss, 0.0), 0.0, 1.0)

    complete_mass = joint.probs * (1.0 - p_miss)
    missing_mass = joint.probs * p_miss
    rows = []
    masses = []
    for i in range(joint.n_cells):
        base = joint.assignments[i]
        if complete_mass[i] > 0.0:
            rows.append(np.append(base, 1))
            masses.append(complete_mass[i])
        if missing_mass[i] > 0.0:
            rows.append(np.append(base, 0))
            masses.append(missing_mass[i])
    return StratumTable(
        variables=joint.variables + (indicator,),
        assignments=np.array(rows, dtype=np.int8).reshape(len(rows), len(joint.variables) + 1),
        probs=np.array(masses, dtype=np.float64),
    )
