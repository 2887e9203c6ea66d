"""Exception taxonomy shared across the package."""


class CcalabError(Exception):
    """Base class for all package-specific errors."""


class SpecError(CcalabError):
    """A data-generating-process definition failed validation."""


class FormulaOutOfRange(SpecError):
    """A linear-probability formula leaves [0, 1] on a reachable assignment."""


class RoleViolation(SpecError):
    """Variable roles are missing, duplicated, or inconsistently configured."""


class OrderViolation(SpecError):
    """A formula references a variable that is not defined at that point."""


class UnknownVariable(CcalabError):
    """A referenced variable name does not exist in the given context."""


class EstimationError(CcalabError):
    """Base class for failures inside the estimation pipeline."""


class EmptyAnalyticSet(EstimationError):
    """No units remain after restriction to complete cases."""


class EmptyStratum(EstimationError):
    """A stratum required by a saturated fit carries no mass."""


class MissingScore(EmptyStratum):
    """A unit's stratum is absent from the fitted score table.

    Subclasses EmptyStratum: an absent stratum is only an error at the moment
    a weight actually needs it.
    """


class NonPositivity(EstimationError):
    """A score of exactly 0 or 1 where a finite nonzero weight is required."""


class EmptyArm(EstimationError):
    """A treatment arm carries zero total mass after weighting."""


class UnsupportedStratum(EstimationError):
    """A treated stratum has no untreated complete-case counterpart."""


class IncompatibleEstimand(CcalabError):
    """The requested estimand is undefined for the given process."""


class ParseError(CcalabError):
    """A config document could not be parsed; carries a line number."""

    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


class ConfigError(CcalabError):
    """A study configuration is structurally invalid."""
