"""Exception hierarchy for curefollowup."""


class CureFollowUpError(Exception):
    """Base class for all package errors."""


class ConfigError(CureFollowUpError, ValueError):
    """Invalid tuning parameter or inconsistent configuration."""


class DataError(CureFollowUpError, ValueError):
    """Input data violates a structural requirement."""


class DegenerateLevel(DataError):
    """A declared covariate level has no observations."""

    def __init__(self, level, label=None):
        self.level = level
        self.label = label
        name = f"{level}" if label is None else f"{level} ({label})"
        super().__init__(f"covariate level {name} has no observations")


class NoEvents(DataError):
    """A subsample has no uncensored observations, so no density can be estimated."""


class DegenerateDomain(DataError):
    """The estimation interval collapsed (fewer than two hull points)."""


class DomainError(CureFollowUpError, ValueError):
    """Evaluation point outside the support of an estimator."""


class SingularBoundarySystem(CureFollowUpError, ArithmeticError):
    """The 2x2 boundary-kernel moment system is numerically singular."""


class DegenerateBootstrap(CureFollowUpError, RuntimeError):
    """Bootstrap replicate kept producing zero events after all retries."""
