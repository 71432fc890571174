"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, NumericError -> 3,
OSError (and friends) -> 4.
"""


class ConfigError(ValueError):
    """Invalid configuration or input schema; message names the offending key."""


class NumericError(RuntimeError):
    """A numerical procedure failed (non-convergence, degeneracy, aliasing)."""


class FitConvergenceError(NumericError):
    """Least-squares fit hit the iteration budget before converging.

    Carries the best parameter vector seen so far in ``best_params``.
    """

    def __init__(self, message, best_params=None, cost=None):
        super().__init__(message)
        self.best_params = best_params
        self.cost = cost


class FitDegenerateError(NumericError):
    """Jacobian is singular; the requested free parameters are not identifiable."""
