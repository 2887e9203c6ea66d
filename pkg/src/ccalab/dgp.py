"""Binary-variable data-generating processes built from linear-probability
structural equations.

A process is an ordered list of variables, each with a role (covariate,
sampling, treatment, outcome) and a formula over earlier variables.
Validation enumerates every reachable assignment exactly, so range violations
are caught deterministically rather than probabilistically. The same
enumeration yields the exact joint distribution that replaces brute-force
"ground truth" mega-samples everywhere downstream.

When a sampling variable is present the process describes a trial embedded in
a wider population: treatment is randomized with a fixed probability inside
the sampled units, and treatment/outcome are structurally undefined (coded
-1) outside them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import _kernels
from ._rng import uniform_block
from .errors import (
    FormulaOutOfRange,
    OrderViolation,
    RoleViolation,
    UnknownVariable,
)
from .formula import LinearProbabilityFormula

ROLES = ("covariate", "sampling", "treatment", "outcome")
_RANGE_EPS = 1e-9

__all__ = [
    "VariableDef",
    "DgpSpec",
    "ValidatedSpec",
    "StratumTable",
    "Dataset",
    "FormulaProgram",
    "validate_spec",
    "enumerate_joint",
    "sample_population",
    "interventional_risk",
]


@dataclass(frozen=True)
class VariableDef:
    name: str
    formula: LinearProbabilityFormula
    role: str = "covariate"


@dataclass(frozen=True)
class DgpSpec:
    """Raw (unvalidated) process definition.

    ``trial_randomization`` is the treatment probability within sampled units;
    it is required exactly when a sampling variable is present, and it replaces
    the treatment variable's declared formula.
    """

    variables: tuple[VariableDef, ...]
    trial_randomization: float | None = None


@dataclass(frozen=True)
class FormulaProgram:
    """Flat-array encoding of all structural equations, consumed by the kernels.

    Variable v's formula occupies terms [term_bounds[v], term_bounds[v+1]);
    term t's factors occupy factor_vars[factor_bounds[t]:factor_bounds[t+1]].
    gate[v] is the index of the variable that must equal 1 for v to be
    defined, or -1 when v is always defined.
    """

    intercepts: np.ndarray
    term_coefs: np.ndarray
    term_bounds: np.ndarray
    factor_vars: np.ndarray
    factor_bounds: np.ndarray
    gate: np.ndarray


def encode_formula(formula: LinearProbabilityFormula, index_of: Mapping[str, int]):
    """Encode one formula into (intercept, coefs, factor_vars, factor_bounds)."""
    coefs = np.array([t.coefficient for t in formula.terms], dtype=np.float64)
    fvars: list[int] = []
    fbounds = [0]
    for term in formula.terms:
        for name in term.factors:
            if name not in index_of:
                raise UnknownVariable(f"formula references unknown variable {name!r}")
            fvars.append(index_of[name])
        fbounds.append(len(fvars))
    return (
        float(formula.intercept),
        coefs,
        np.array(fvars, dtype=np.int32),
        np.array(fbounds, dtype=np.int32),
    )


class ValidatedSpec:
    """A DgpSpec that passed validation, with its exact joint precomputed.

    Immutable after construction; safe to share across worker threads.
    Construct via :func:`validate_spec` only.
    """

    def __init__(self, spec: DgpSpec, program: FormulaProgram, joint: "StratumTable"):
        self.spec = spec
        self.names: tuple[str, ...] = tuple(v.name for v in spec.variables)
        self.roles: tuple[str, ...] = tuple(v.role for v in spec.variables)
        self.index_of: dict[str, int] = {n: i for i, n in enumerate(self.names)}
        self.covariates: tuple[str, ...] = tuple(
            v.name for v in spec.variables if v.role == "covariate"
        )
        self.treatment: str = next(v.name for v in spec.variables if v.role == "treatment")
        self.outcome: str = next(v.name for v in spec.variables if v.role == "outcome")
        self.sampling: str | None = next(
            (v.name for v in spec.variables if v.role == "sampling"), None
        )
        self.trial_randomization = spec.trial_randomization
        self.program = program
        self._joint = joint

    @property
    def n_variables(self) -> int:
        return len(self.names)

    def joint(self) -> "StratumTable":
        return self._joint

    def __repr__(self):
        return f"ValidatedSpec({', '.join(self.names)})"


@dataclass(frozen=True, eq=False)
class StratumTable:
    """Exact joint probability table over binary assignments.

    Assignments use -1 for structurally undefined entries (reduced cells);
    zero-probability cells are dropped.
    """

    variables: tuple[str, ...]
    assignments: np.ndarray  # (cells, V) int8
    probs: np.ndarray  # (cells,) float64

    def __post_init__(self):
        self.assignments.setflags(write=False)
        self.probs.setflags(write=False)

    @property
    def n_cells(self) -> int:
        return len(self.probs)

    def index_of(self, name: str) -> int:
        try:
            return self.variables.index(name)
        except ValueError:
            raise UnknownVariable(f"no variable named {name!r} in table") from None

    def column(self, name: str) -> np.ndarray:
        return self.assignments[:, self.index_of(name)]

    def total(self) -> float:
        return float(self.probs.sum())

    def mass(self, name: str, value: int) -> float:
        """Total probability of cells where ``name`` equals ``value``."""
        return float(self.probs[self.column(name) == value].sum())


@dataclass(frozen=True, eq=False)
class Dataset:
    """Sampled binary rows plus a missingness mask.

    ``values`` is (V, n) int8 with -1 for structurally undefined cells.
    ``mask`` maps a variable name to a boolean row vector (True = missing);
    masked cells keep their true underlying value in ``values`` so exact
    oracle cross-checks remain possible, but estimators must treat them as
    unobserved.
    """

    variables: tuple[str, ...]
    values: np.ndarray
    mask: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.values.setflags(write=False)
        for arr in self.mask.values():
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def index_of(self, name: str) -> int:
        try:
            return self.variables.index(name)
        except ValueError:
            raise UnknownVariable(f"no variable named {name!r} in dataset") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[self.index_of(name)]

    def observed(self, name: str) -> np.ndarray:
        if name in self.mask:
            return ~self.mask[name]
        return np.ones(self.n, dtype=bool)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.variables == other.variables
            and np.array_equal(self.values, other.values)
            and self.mask.keys() == other.mask.keys()
            and all(np.array_equal(self.mask[k], other.mask[k]) for k in self.mask)
        )


def _build_program(spec: DgpSpec, index_of: Mapping[str, int]) -> FormulaProgram:
    names = list(index_of)
    sampling_idx = next(
        (i for i, v in enumerate(spec.variables) if v.role == "sampling"), -1
    )
    intercepts, coefs, fvars, gate = [], [], [], []
    term_bounds = [0]
    factor_bounds = [0]
    for i, vdef in enumerate(spec.variables):
        if sampling_idx >= 0 and vdef.role == "treatment":
            # randomized within the trial; declared formula is replaced
            intercepts.append(float(spec.trial_randomization))
            gate.append(sampling_idx)
        else:
            intercepts.append(float(vdef.formula.intercept))
            for term in vdef.formula.terms:
                coefs.append(term.coefficient)
                fvars.extend(index_of[f] for f in term.factors)
                factor_bounds.append(len(fvars))
            gate.append(sampling_idx if (sampling_idx >= 0 and vdef.role == "outcome") else -1)
        term_bounds.append(len(coefs))
    return FormulaProgram(
        intercepts=np.array(intercepts, dtype=np.float64),
        term_coefs=np.array(coefs, dtype=np.float64),
        term_bounds=np.array(term_bounds, dtype=np.int32),
        factor_vars=np.array(fvars, dtype=np.int32),
        factor_bounds=np.array(factor_bounds, dtype=np.int32),
        gate=np.array(gate, dtype=np.int32),
    )


def _program_value(program: FormulaProgram, v: int, assignment: tuple) -> float:
    p = float(program.intercepts[v])
    for t in range(program.term_bounds[v], program.term_bounds[v + 1]):
        prod = float(program.term_coefs[t])
        for k in range(program.factor_bounds[t], program.factor_bounds[t + 1]):
            prod *= assignment[program.factor_vars[k]]
        p += prod
    return p


def _enumerate(spec: DgpSpec, program: FormulaProgram, names: tuple[str, ...]):
    """Chain-rule expansion over reachable assignments, with range checks.

    Raises FormulaOutOfRange the moment any formula leaves [0, 1] on a
    positive-probability assignment of its ancestors.
    """
    cells: list[tuple[tuple, float]] = [((), 1.0)]
    for v, name in enumerate(names):
        gate = int(program.gate[v])
        grown: list[tuple[tuple, float]] = []
        for assign, prob in cells:
            if gate >= 0 and assign[gate] != 1:
                grown.append((assign + (-1,), prob))
                continue
            p = _program_value(program, v, assign)
            if not (-_RANGE_EPS <= p <= 1.0 + _RANGE_EPS):
                shown = {names[i]: a for i, a in enumerate(assign) if a >= 0}
                raise FormulaOutOfRange(
                    f"P({name}=1) = {p:.6g} outside [0, 1] at {shown}"
                )
            p = min(max(p, 0.0), 1.0)
            if p < 1.0:
                grown.append((assign + (0,), prob * (1.0 - p)))
            if p > 0.0:
                grown.append((assign + (1,), prob * p))
        cells = grown
    assignments = np.array([a for a, _ in cells], dtype=np.int8).reshape(len(cells), len(names))
    probs = np.array([p for _, p in cells], dtype=np.float64)
    return StratumTable(variables=names, assignments=assignments, probs=probs)


def validate_spec(spec: DgpSpec) -> ValidatedSpec:
    """Check every structural invariant and return the spec tagged valid.

    Raises RoleViolation, OrderViolation, or FormulaOutOfRange; the range
    check enumerates all reachable ancestor assignments rather than sampling.
    """
    if not spec.variables:
        raise RoleViolation("process defines no variables")
    names = tuple(v.name for v in spec.variables)
    if len(set(names)) != len(names):
        raise RoleViolation("duplicate variable names")
    for vdef in spec.variables:
        if vdef.role not in ROLES:
            raise RoleViolation(f"unknown role {vdef.role!r} for {vdef.name!r}")

    by_role = {role: [v.name for v in spec.variables if v.role == role] for role in ROLES}
    for role in ("treatment", "outcome"):
        if len(by_role[role]) != 1:
            raise RoleViolation(
                f"need exactly one {role} variable, found {len(by_role[role])}"
            )
    if len(by_role["sampling"]) > 1:
        raise RoleViolation("at most one sampling variable is allowed")

    has_sampling = bool(by_role["sampling"])
    if has_sampling and spec.trial_randomization is None:
        raise RoleViolation("a sampling variable requires trial_randomization")
    if not has_sampling and spec.trial_randomization is not None:
        raise RoleViolation("trial_randomization requires a sampling variable")
    if spec.trial_randomization is not None and not (
        -_RANGE_EPS <= spec.trial_randomization <= 1.0 + _RANGE_EPS
    ):
        raise FormulaOutOfRange(
            f"trial_randomization {spec.trial_randomization} outside [0, 1]"
        )

    index_of = {n: i for i, n in enumerate(names)}
    positions = {role: [index_of[n] for n in members] for role, members in by_role.items()}
    if has_sampling:
        s_pos = positions["sampling"][0]
        if s_pos > positions["treatment"][0] or s_pos > positions["outcome"][0]:
            raise OrderViolation("sampling variable must precede treatment and outcome")

    # reference checks: earlier-only, and role-consistent (covariate/sampling/
    # treatment models draw on covariates; the outcome model may add treatment)
    role_of = {v.name: v.role for v in spec.variables}
    treatment_name = by_role["treatment"][0]
    for i, vdef in enumerate(spec.variables):
        if has_sampling and vdef.role == "treatment":
            continue  # formula replaced by trial_randomization
        for ref in vdef.formula.referenced():
            if ref not in index_of:
                raise OrderViolation(f"{vdef.name!r} references unknown variable {ref!r}")
            if index_of[ref] >= i:
                raise OrderViolation(f"{vdef.name!r} references {ref!r} before it is defined")
            allowed = ref != vdef.name and role_of[ref] == "covariate"
            if vdef.role == "outcome" and ref == treatment_name:
                allowed = True
            if not allowed:
                raise RoleViolation(
                    f"{vdef.role} {vdef.name!r} may not depend on {role_of[ref]} {ref!r}"
                )

    program = _build_program(spec, index_of)
    joint = _enumerate(spec, program, names)  # raises FormulaOutOfRange on violation
    return ValidatedSpec(spec, program, joint)


def enumerate_joint(spec: ValidatedSpec) -> StratumTable:
    """Exact joint over all variables by chain-rule multiplication.

    Cells outside the sampled trial carry -1 in the treatment and outcome
    positions (reduced assignments).
    """
    return spec.joint()


def sample_population(spec: ValidatedSpec, n: int, seed: int) -> Dataset:
    """Draw n independent units in definition order; deterministic in seed."""
    if n < 0:
        raise ValueError("n must be >= 0")
    uniforms = uniform_block(seed, (spec.n_variables, n))
    prog = spec.program
    values = _kernels.simulate_columns(
        prog.intercepts,
        prog.term_coefs,
        prog.term_bounds,
        prog.factor_vars,
        prog.factor_bounds,
        prog.gate,
        uniforms,
    )
    return Dataset(variables=spec.names, values=values)


def interventional_risk(spec: ValidatedSpec, covariates: Mapping[str, int], x: int) -> float:
    """P(outcome = 1) with treatment forced to x at the given covariate stratum."""
    for name in covariates:
        if name not in spec.index_of:
            raise UnknownVariable(f"unknown variable {name!r} in assignment")
        if name not in spec.covariates:
            raise UnknownVariable(f"{name!r} is not a covariate")
    missing = [c for c in spec.covariates if c not in covariates]
    if missing:
        raise UnknownVariable(f"assignment does not cover covariates {missing}")
    assignment = dict(covariates)
    assignment[spec.treatment] = x
    outcome_formula = next(v.formula for v in spec.spec.variables if v.role == "outcome")
    return float(outcome_formula.value(assignment))
