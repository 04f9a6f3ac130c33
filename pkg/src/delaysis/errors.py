"""Exception types shared across the toolkit."""


class DelaysisError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(DelaysisError):
    """Malformed input data or configuration."""


class UnstableSystemError(DelaysisError):
    """The requested quantity is undefined because the system is unstable."""


class SingularityError(DelaysisError):
    """An eigenvalue falls inside the guard band of a matrix function."""


class InfeasibleError(DelaysisError):
    """No strictly feasible point exists for the requested optimization."""


class ConvergenceError(DelaysisError):
    """Iteration budget exhausted before reaching the requested tolerance."""
