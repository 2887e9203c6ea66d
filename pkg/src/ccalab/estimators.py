"""Complete-case weighted risk-difference estimators.

Everything operates on a WeightedSample: a list of units (assignment, mass,
observed flags). A sampled dataset becomes units of mass 1 aggregated by
cell; an exact probability table becomes units of mass equal to cell
probability. Running the identical functional on both is what makes the
enumerated large-sample limits definitionally the estimators' targets.

The four estimands differ only in their weight maps:

    ATE       X/e(c) + (1-X)/(1-e(c))                 inverse probability
    ATT       X + (1-X) * e(c)/(1-e(c))               odds
    AT_TRANS  [S=1] (1-s(c))/s(c) * (X/p + (1-X)/(1-p))   inverse odds of sampling
    AT_GEN    [S=1] 1/s(c) * (X/p + (1-X)/(1-p))          inverse probability of sampling

with saturated (stratum-frequency) scores refit on the complete cases, and a
Hajek (self-normalizing) risk difference at the end.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .dgp import Dataset, StratumTable, ValidatedSpec
from .errors import (
    EmptyAnalyticSet,
    EmptyArm,
    IncompatibleEstimand,
    MissingScore,
    NonPositivity,
    UnknownVariable,
    UnsupportedStratum,
)

log = logging.getLogger(__name__)

__all__ = [
    "EstimandKind",
    "ESTIMAND_ORDER",
    "WeightedSample",
    "ProbTable",
    "EstimateRecord",
    "complete_cases",
    "fit_saturated",
    "build_weights",
    "hajek_rd",
    "standardize_att",
    "estimate",
    "covariate_balance_gap",
]


class EstimandKind(Enum):
    ATT = "ATT"
    ATE = "ATE"
    AT_TRANS = "AT_TRANS"
    AT_GEN = "AT_GEN"


ESTIMAND_ORDER = (
    EstimandKind.ATT,
    EstimandKind.ATE,
    EstimandKind.AT_TRANS,
    EstimandKind.AT_GEN,
)

_SAMPLING_KINDS = (EstimandKind.AT_TRANS, EstimandKind.AT_GEN)


@dataclass(frozen=True, eq=False)
class WeightedSample:
    """Units of positive mass over named binary variables.

    values uses -1 for structurally undefined entries; observed is False only
    for masked (measured-but-missing) entries. Masked entries keep their true
    value in ``values`` for oracle cross-checks, and every estimator step
    restricts to observed entries before reading them.
    """

    variables: tuple[str, ...]
    values: np.ndarray  # (units, V) int8
    observed: np.ndarray  # (units, V) bool
    mass: np.ndarray  # (units,) float64

    def __post_init__(self):
        self.values.setflags(write=False)
        self.observed.setflags(write=False)
        self.mass.setflags(write=False)

    @property
    def n_units(self) -> int:
        return len(self.mass)

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    def index_of(self, name: str) -> int:
        try:
            return self.variables.index(name)
        except ValueError:
            raise UnknownVariable(f"no variable named {name!r} in sample") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index_of(name)]

    def subset(self, keep: np.ndarray) -> "WeightedSample":
        return WeightedSample(
            self.variables, self.values[keep], self.observed[keep], self.mass[keep]
        )

    def with_mass(self, mass: np.ndarray) -> "WeightedSample":
        keep = mass > 0.0
        return WeightedSample(
            self.variables, self.values[keep], self.observed[keep], mass[keep]
        )

    @classmethod
    def from_dataset(cls, data: Dataset) -> "WeightedSample":
        """Aggregate rows into cells; mass = row count per cell.

        Cells are keyed by (true values, per-variable observed flags), so two
        masked rows with different underlying values stay distinct.
        """
        n_vars = len(data.variables)
        masked = [v for v in data.variables if v in data.mask]
        span = 3**n_vars * 2 ** max(len(masked), 1)
        if n_vars <= 12 and span <= 1 << 24:
            first = data.mask[masked[0]] if masked else None
            codes = _kernels.cell_codes(data.values, first)
            scale = 2 * 3**n_vars if masked else 3**n_vars
            for var in masked[1:]:
                codes = codes + data.mask[var].astype(np.int64) * scale
                scale *= 2
            counts = np.bincount(codes, minlength=scale)
            present = np.nonzero(counts)[0]
            values = np.empty((len(present), n_vars), dtype=np.int8)
            for v in range(n_vars):
                values[:, v] = (present // 3**v) % 3 - 1
            observed = np.ones((len(present), n_vars), dtype=bool)
            bit = 3**n_vars
            for var in masked:
                observed[:, data.variables.index(var)] = (present // bit) % 2 == 0
                bit *= 2
            mass = counts[present].astype(np.float64)
        else:  # generic fallback for wide processes
            stacked = np.vstack(
                [data.values] + [data.mask[v].astype(np.int8) for v in masked]
            ).T
            uniq, counts = np.unique(stacked, axis=0, return_counts=True)
            values = np.ascontiguousarray(uniq[:, :n_vars], dtype=np.int8)
            observed = np.ones((len(uniq), n_vars), dtype=bool)
            for k, var in enumerate(masked):
                observed[:, data.variables.index(var)] = uniq[:, n_vars + k] == 0
            mass = counts.astype(np.float64)
        return cls(data.variables, values, observed, mass)

    @classmethod
    def from_joint(
        cls,
        table: StratumTable,
        missing_indicator: str | None = None,
        target: str | None = None,
    ) -> "WeightedSample":
        """Turn an exact probability table into units of mass = probability.

        With a complete-case indicator column, rows where it is 0 become units
        whose target entry is unobserved; the indicator column itself is
        dropped.
        """
        if missing_indicator is None:
            values = np.ascontiguousarray(table.assignments, dtype=np.int8)
            observed = np.ones(values.shape, dtype=bool)
            return cls(table.variables, values, observed, table.probs.copy())
        if target is None:
            raise ValueError("missing_indicator requires the target variable name")
        r_idx = table.index_of(missing_indicator)
        keep_cols = [i for i in range(len(table.variables)) if i != r_idx]
        variables = tuple(table.variables[i] for i in keep_cols)
        values = np.ascontiguousarray(table.assignments[:, keep_cols], dtype=np.int8)
        observed = np.ones(values.shape, dtype=bool)
        t_idx = variables.index(target)
        observed[:, t_idx] = table.assignments[:, r_idx] == 1
        return cls(variables, values, observed, table.probs.copy())


@dataclass(frozen=True)
class ProbTable:
    """Saturated score table: conditioning assignment -> fitted probability."""

    conditioning: tuple[str, ...]
    values: dict[tuple[int, ...], float]

    def lookup(self, key: tuple[int, ...]) -> float:
        try:
            return self.values[key]
        except KeyError:
            raise MissingScore(
                f"no fitted score for stratum {dict(zip(self.conditioning, key))}"
            ) from None


@dataclass(frozen=True)
class EstimateRecord:
    kind: EstimandKind
    value: float
    retained_mass: float  # complete-case mass (row count for datasets)


def complete_cases(ws: WeightedSample, required: Sequence[str]) -> WeightedSample:
    """Keep units observing every required variable; masses unchanged."""
    idxs = [ws.index_of(v) for v in required]
    keep = ws.observed[:, idxs].all(axis=1)
    if not keep.any():
        raise EmptyAnalyticSet("no complete cases remain")
    return ws.subset(keep)


def fit_saturated(
    ws: WeightedSample, target: str, conditioning: Sequence[str]
) -> ProbTable:
    """Mass-weighted frequency of target = 1 within each conditioning stratum.

    Fits on units where the target is defined; requires target and
    conditioning entries to be observed there.
    """
    t_idx = ws.index_of(target)
    cond_idx = [ws.index_of(c) for c in conditioning]
    defined = ws.values[:, t_idx] >= 0
    if defined.any():
        used = ws.observed[defined][:, [t_idx] + cond_idx]
        if not used.all():
            raise ValueError("fit_saturated requires observed target and conditioning values")
    rows = ws.values[defined][:, cond_idx]
    uniq, inverse = np.unique(rows, axis=0, return_inverse=True)
    mass = ws.mass[defined]
    den = np.bincount(inverse, weights=mass, minlength=len(uniq))
    num = np.bincount(
        inverse, weights=mass * (ws.values[defined, t_idx] == 1), minlength=len(uniq)
    )
    values = {
        tuple(int(x) for x in uniq[i]): float(num[i] / den[i]) for i in range(len(uniq))
    }
    return ProbTable(tuple(conditioning), values)


def _unit_scores(ws, scores, policy):
    """Per-unit fitted score; with policy 'drop', units in unscored strata are
    flagged instead of raising."""
    cond_idx = [ws.index_of(c) for c in scores.conditioning]
    rows = ws.values[:, cond_idx]
    uniq, inverse = np.unique(rows, axis=0, return_inverse=True)
    per_uniq = np.empty(len(uniq))
    dropped_uniq = np.zeros(len(uniq), dtype=bool)
    for i in range(len(uniq)):
        key = tuple(int(x) for x in uniq[i])
        if key in scores.values:
            per_uniq[i] = scores.values[key]
        elif policy == "drop":
            per_uniq[i] = np.nan
            dropped_uniq[i] = True
        else:
            scores.lookup(key)  # raises MissingScore
    if dropped_uniq.any():
        log.warning(
            "dropping %d unit cells in %d unscored strata",
            int(dropped_uniq[inverse].sum()),
            int(dropped_uniq.sum()),
        )
    return per_uniq[inverse], dropped_uniq[inverse]


def build_weights(
    ws: WeightedSample,
    scores: ProbTable,
    kind: EstimandKind,
    *,
    treatment: str,
    sampling: str | None = None,
    trial_randomization: float | None = None,
    policy: str = "error",
) -> WeightedSample:
    """Multiply unit masses by the estimand's weight map (see module docstring).

    For the sampling-based estimands, units outside the trial are dropped from
    estimation. Zero-weight units are dropped; a score of 0 or 1 where a
    nonzero finite weight is required raises NonPositivity.
    """
    score, dropped = _unit_scores(ws, scores, policy)
    x = ws.column(treatment)
    mult = np.zeros(ws.n_units)

    if kind in (EstimandKind.ATE, EstimandKind.ATT):
        treated = x == 1
        untreated = x == 0
        if kind is EstimandKind.ATE:
            if (score[treated & ~dropped] == 0.0).any():
                raise NonPositivity("propensity 0 in a stratum with treated units")
            if (score[untreated & ~dropped] == 1.0).any():
                raise NonPositivity("propensity 1 in a stratum with untreated units")
            mult[treated] = 1.0 / score[treated]
            mult[untreated] = 1.0 / (1.0 - score[untreated])
        else:
            if (score[untreated & ~dropped] == 1.0).any():
                raise NonPositivity("propensity 1 in a stratum with untreated units")
            mult[treated] = 1.0
            mult[untreated] = score[untreated] / (1.0 - score[untreated])
    else:
        if sampling is None or trial_randomization is None:
            raise IncompatibleEstimand(
                f"{kind.value} needs a sampling variable and trial_randomization"
            )
        p = trial_randomization
        s_col = ws.column(sampling)
        in_trial = s_col == 1
        if (x[in_trial] == 1).any() and p == 0.0:
            raise NonPositivity("trial randomization 0 with treated units present")
        if (x[in_trial] == 0).any() and p == 1.0:
            raise NonPositivity("trial randomization 1 with untreated units present")
        if (score[in_trial & ~dropped] == 0.0).any():
            raise NonPositivity("sampling score 0 in a stratum with trial units")
        arm = np.zeros(ws.n_units)
        arm[in_trial & (x == 1)] = 1.0 / p
        arm[in_trial & (x == 0)] = 1.0 / (1.0 - p)
        if kind is EstimandKind.AT_TRANS:
            mult[in_trial] = (1.0 - score[in_trial]) / score[in_trial] * arm[in_trial]
        else:
            mult[in_trial] = arm[in_trial] / score[in_trial]

    mult[dropped] = 0.0
    return ws.with_mass(ws.mass * mult)


def hajek_rd(ws: WeightedSample, treatment: str, outcome: str) -> float:
    """Self-normalized weighted risk difference between the two arms."""
    x = ws.column(treatment)
    y = ws.column(outcome)
    if (x < 0).any() or (y < 0).any():
        raise ValueError("hajek_rd needs treatment and outcome values on every unit")
    den1 = float(ws.mass[x == 1].sum())
    den0 = float(ws.mass[x == 0].sum())
    if den1 <= 0.0:
        raise EmptyArm("treated arm has zero mass")
    if den0 <= 0.0:
        raise EmptyArm("untreated arm has zero mass")
    num1 = float(ws.mass[(x == 1) & (y == 1)].sum())
    num0 = float(ws.mass[(x == 0) & (y == 1)].sum())
    return num1 / den1 - num0 / den0


def _stratum_masses(values, mass):
    uniq, inverse = np.unique(values, axis=0, return_inverse=True)
    sums = np.bincount(inverse, weights=mass, minlength=len(uniq))
    return {tuple(int(x) for x in uniq[i]): float(sums[i]) for i in range(len(uniq))}


def standardize_att(
    ws: WeightedSample, treatment: str, outcome: str, covariates: Sequence[str]
) -> float:
    """Plug-in standardization: treated risk minus untreated complete-case
    risks averaged over the treated covariate distribution.

    Requires fully observed treated units. Raises UnsupportedStratum when a
    treated stratum has no untreated complete-case counterpart.
    """
    t_idx = ws.index_of(treatment)
    y_idx = ws.index_of(outcome)
    cov_idx = [ws.index_of(c) for c in covariates]
    x = ws.values[:, t_idx]
    treated = x == 1
    if not treated.any():
        raise EmptyArm("no treated units")
    if not ws.observed[treated][:, cov_idx + [t_idx, y_idx]].all():
        raise ValueError("standardize_att requires fully observed treated units")

    t_mass = float(ws.mass[treated].sum())
    treated_risk = float(ws.mass[treated & (ws.values[:, y_idx] == 1)].sum()) / t_mass
    treated_dist = _stratum_masses(ws.values[treated][:, cov_idx], ws.mass[treated])

    cc = ws.observed[:, cov_idx + [t_idx, y_idx]].all(axis=1)
    untreated_cc = (x == 0) & cc
    den = _stratum_masses(ws.values[untreated_cc][:, cov_idx], ws.mass[untreated_cc])
    num = _stratum_masses(
        ws.values[untreated_cc & (ws.values[:, y_idx] == 1)][:, cov_idx],
        ws.mass[untreated_cc & (ws.values[:, y_idx] == 1)],
    )
    counterfactual = 0.0
    for key, tm in treated_dist.items():
        if key not in den:
            raise UnsupportedStratum(
                f"treated stratum {dict(zip(covariates, key))} has no untreated complete cases"
            )
        counterfactual += (tm / t_mass) * (num.get(key, 0.0) / den[key])
    return treated_risk - counterfactual


def estimate(
    ws: WeightedSample,
    kind: EstimandKind,
    spec: ValidatedSpec,
    *,
    policy: str = "error",
) -> EstimateRecord:
    """Full complete-case pipeline: restrict -> fit scores -> weight -> Hajek.

    Scores are refit on the complete cases (the whole analysis, including the
    weight models, is a complete-case analysis). For the sampling-based
    estimands the sampling score is fitted on complete-case trial units plus
    all target units.
    """
    cc = complete_cases(ws, list(ws.variables))
    retained = cc.total_mass
    if kind in _SAMPLING_KINDS:
        if spec.sampling is None:
            raise IncompatibleEstimand(f"{kind.value} requires a sampling variable")
        scores = fit_saturated(cc, spec.sampling, spec.covariates)
        weighted = build_weights(
            cc,
            scores,
            kind,
            treatment=spec.treatment,
            sampling=spec.sampling,
            trial_randomization=spec.trial_randomization,
            policy=policy,
        )
    else:
        if spec.sampling is not None:
            # the study population is the trial; outside units carry no
            # treatment or outcome and cannot enter these estimands
            cc = cc.subset(cc.column(spec.sampling) == 1)
            if cc.n_units == 0:
                raise EmptyAnalyticSet("no trial units among complete cases")
        scores = fit_saturated(cc, spec.treatment, spec.covariates)
        weighted = build_weights(
            cc, scores, kind, treatment=spec.treatment, policy=policy
        )
    value = hajek_rd(weighted, spec.treatment, spec.outcome)
    return EstimateRecord(kind=kind, value=value, retained_mass=retained)


def covariate_balance_gap(
    weighted: WeightedSample, treatment: str, covariates: Sequence[str]
) -> float:
    """Max absolute gap between the mass-normalized covariate distributions of
    the two arms of an already-weighted sample (0 under exact balance)."""
    cov_idx = [weighted.index_of(c) for c in covariates]
    x = weighted.column(treatment)
    dists = []
    for arm in (1, 0):
        sel = x == arm
        total = float(weighted.mass[sel].sum())
        if total <= 0.0:
            raise EmptyArm(f"arm {arm} has zero mass")
        cells = _stratum_masses(weighted.values[sel][:, cov_idx], weighted.mass[sel])
        dists.append({k: v / total for k, v in cells.items()})
    keys = set(dists[0]) | set(dists[1])
    return max(abs(dists[0].get(k, 0.0) - dists[1].get(k, 0.0)) for k in keys)
