"""Exception hierarchy shared by all modules."""


class PropcalError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(PropcalError, ValueError):
    """A parameter is outside its admissible domain (e.g. sigma <= 0, r <= 0)."""


class OrderingError(PropcalError, ValueError):
    """An ordering requirement is violated (cutoffs not decreasing, variances
    not strictly decreasing, bandwidths not increasing)."""


class NotPositiveDefiniteError(PropcalError, ValueError):
    """A covariance (or correlation block) failed a symmetric factorization."""


class EmptyWindowError(PropcalError, ValueError):
    """A kernel bandwidth produced an all-zero weight vector."""


class BracketError(PropcalError, RuntimeError):
    """Threshold bisection could not bracket a feasible value; indicates NaNs
    or a corrupted null sample, since the empirical risk vanishes for large z."""


class BalanceError(PropcalError, ValueError):
    """No index satisfies the bias-variance balance relation."""


class InvariantError(PropcalError, AssertionError):
    """A runtime invariant asserted by the procedure failed."""
