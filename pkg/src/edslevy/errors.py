"""Exception hierarchy.

Config problems (bad inputs, schema violations) and numerical failures
(non-convergence, root defects) are kept separate so the CLI can map them
to distinct exit codes.
"""


class EdsLevyError(Exception):
    """Base class for all package errors."""


class ConfigError(EdsLevyError):
    """Invalid configuration or input (CLI exit code 2)."""


class NumericalError(EdsLevyError):
    """Numerical failure: non-convergence, invalid result (CLI exit code 3)."""


class FitError(NumericalError):
    """Mixture fit failed; carries the best iterate seen so far."""

    def __init__(self, message, best_nodes=None, best_objective=None):
        super().__init__(message)
        self.best_nodes = best_nodes
        self.best_objective = best_objective


class RootFindingError(NumericalError):
    """Root set for kappa(s) = a could not be validated."""


class InversionError(NumericalError):
    """Laplace inversion produced non-finite or invalid values."""


class PricingError(NumericalError):
    """Option pricing integral failed to converge or inputs degenerate."""


class CalibrationError(NumericalError):
    """Calibration failed; carries the best parameters seen so far."""

    def __init__(self, message, best_params=None, best_rmse=None):
        super().__init__(message)
        self.best_params = best_params
        self.best_rmse = best_rmse
