"""Exception types shared across the laboratory."""


class RmfLabError(Exception):
    """Base class for every error raised by this package."""


class DomainError(RmfLabError, ValueError):
    """Input outside an operation's mathematical domain."""


class SieveBaseError(DomainError):
    """Prime base too small to factor the requested block."""


class SignRangeError(DomainError):
    """A prime factor falls outside a sign assignment's range."""


class EnumerationLimitError(DomainError):
    """Exact enumeration refused: universe exceeds the assignment budget."""


class DivergenceError(DomainError):
    """A parameterization violates its series-convergence condition."""


class PoleError(DomainError):
    """An Euler factor is singular at the requested point."""


class CertificationError(RmfLabError):
    """Interval arithmetic could not certify a sign or value."""


class FitError(RmfLabError):
    """No admissible constant witness found on the search grid."""
