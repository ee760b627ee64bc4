"""Exception types shared across the package."""


class RandMarginsError(Exception):
    """Base class for all package-specific errors."""


class InvalidParams(RandMarginsError, ValueError):
    """A parameter violates its documented precondition."""


class DimensionMismatch(RandMarginsError, ValueError):
    """A coordinate vector does not match the domain dimension."""


class EmptyDataset(RandMarginsError, ValueError):
    """An operation that needs at least one example received none."""


class TooFewPoints(RandMarginsError, ValueError):
    """An interior point solver got fewer values than its sample complexity."""


class InsufficientData(RandMarginsError, RuntimeError):
    """A learner ran out of usable points before finishing."""


class DomainTooLarge(RandMarginsError, ValueError):
    """Exact output distributions are limited to small domains."""


class InvalidStrategy(RandMarginsError, ValueError):
    """An adversary strategy emitted parameters outside the allowed region."""


class PairingError(RandMarginsError, ValueError):
    """Two traces were expected to come from paired executions but do not."""
