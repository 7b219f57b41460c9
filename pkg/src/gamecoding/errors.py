"""Exception hierarchy shared across the package."""


class GameOfCodingError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(GameOfCodingError, ValueError):
    """Invalid configuration or construction parameters."""


class DomainError(GameOfCodingError, ValueError):
    """Argument outside the domain of a mathematical function."""


class InfeasibleError(GameOfCodingError):
    """No candidate satisfies the constraints of a search."""


class UndefinedConditionalError(GameOfCodingError):
    """Conditioning on an event of probability zero."""


class InsufficientDataError(GameOfCodingError):
    """A Monte Carlo check does not have enough samples to be meaningful."""


class MonotonicityError(GameOfCodingError, ValueError):
    """A utility function violates its required monotonicity."""


class EvaluationError(GameOfCodingError):
    """A utility function is not finite anywhere it was evaluated."""
