"""Exception types shared across the package."""


class InstabilityError(ValueError):
    """Raised when a mean-value quantity is requested for an unstable system."""


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a formula."""


class ConvergenceError(RuntimeError):
    """Raised when a scan or a numerical solver fails to converge."""


class StateSpaceTooLarge(ValueError):
    """Raised when a truncated Markov chain would exceed the state limit."""


class LittleLawViolation(RuntimeError):
    """Raised when a simulated run breaks L = lambda * W beyond tolerance."""


class TruncationWarning(UserWarning):
    """Emitted when too much stationary mass sits on a truncation boundary."""


class StabilityWarning(UserWarning):
    """Emitted when a simulation is started outside the stability region."""
