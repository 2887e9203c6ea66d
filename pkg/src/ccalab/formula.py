"""Linear-probability formulas over named binary variables.

A formula is ``intercept + sum(coefficient * product(factors))`` where every
factor is the name of a previously defined binary variable. These are the
only model form the laboratory supports: structural equations, treatment and
sampling models, and missingness models are all instances.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import UnknownVariable

__all__ = ["Term", "LinearProbabilityFormula", "lpf"]


@dataclass(frozen=True)
class Term:
    """One product term: ``coefficient * factor_1 * ... * factor_k`` (k >= 1)."""

    coefficient: float
    factors: tuple[str, ...]

    def __post_init__(self):
        if not self.factors:
            raise ValueError("a term needs at least one factor; use the intercept for constants")


@dataclass(frozen=True)
class LinearProbabilityFormula:
    intercept: float
    terms: tuple[Term, ...] = ()

    def referenced(self) -> tuple[str, ...]:
        """All factor names, in first-appearance order, regardless of coefficient."""
        seen: dict[str, None] = {}
        for term in self.terms:
            for name in term.factors:
                seen.setdefault(name)
        return tuple(seen)

    def predictors(self) -> tuple[str, ...]:
        """Factor names that actually move the value (nonzero coefficient)."""
        seen: dict[str, None] = {}
        for term in self.terms:
            if term.coefficient != 0.0:
                for name in term.factors:
                    seen.setdefault(name)
        return tuple(seen)

    def value(self, assignment: Mapping[str, float]) -> float:
        total = self.intercept
        for term in self.terms:
            prod = term.coefficient
            for name in term.factors:
                try:
                    prod *= assignment[name]
                except KeyError:
                    raise UnknownVariable(f"formula references undefined variable {name!r}") from None
            total += prod
        return total

    def __str__(self) -> str:
        parts = [_fmt(self.intercept)]
        for term in self.terms:
            sign = "-" if term.coefficient < 0 else "+"
            parts.append(f" {sign} {_fmt(abs(term.coefficient))}*" + "*".join(term.factors))
        return "".join(parts)


def _fmt(x: float) -> str:
    return format(x, "g")


def lpf(intercept: float, *terms: Iterable) -> LinearProbabilityFormula:
    """Shorthand constructor: ``lpf(0.05, (0.1, "C1"), (0.1, "C1", "C2"))``."""
    built = tuple(Term(float(t[0]), tuple(t[1:])) for t in terms)
    return LinearProbabilityFormula(float(intercept), built)
