"""Exception types shared across the package.

The CLI maps these onto exit codes: ValidationError -> 1,
NumericalError -> 2, NonConvergenceError -> 3.
"""


class FmppError(Exception):
    pass


class ValidationError(FmppError, ValueError):
    """Bad input: violated preconditions, malformed specs or configs."""


class NumericalError(FmppError, RuntimeError):
    """Runtime numerical failure: singular systems, failed factorizations,
    zero likelihoods at data points, rejection-bound breaches."""


class NonConvergenceError(FmppError, RuntimeError):
    """An iterative procedure exhausted its budget without converging."""
