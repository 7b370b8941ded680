"""EDS pricing under a hyperexponential-jump-plus-diffusion approximation.

Pipeline: fit an exponential mixture to the tempered power-law jump kernel,
assemble the jump-diffusion model, factorize kappa(s) = a in closed form via
polynomial roots, invert the first-passage transforms to a daily curve, and
price equity default swaps from it.  A Monte Carlo oracle cross-validates the
analytic route.
"""

__version__ = "0.1.0"

from .calibration import CalibrationResult, OptionQuote, calibrate, european_price
from .edspricing import DiscountCurve, EdsContract, EdsQuote, accrual_days, eds_rate, swap_value
from .errors import (CalibrationError, ConfigError, EdsLevyError, FitError,
                     InversionError, NumericalError, PricingError, RootFindingError)
from .hyperexp import (CgmyParams, ExpMixtureFit, build_two_sided_density,
                       fit_exponential_mixture, preset_fit, PRESET_NODES, PRESET_STARTS)
from .inversion import EulerInversionParams, FirstPassageCurve, invert, passage_curve
from .levymodel import (DiffusionConfig, HyperExpLevyModel, build_model,
                        risk_neutral_drift, small_jump_variance)
from .mcoracle import PassageEstimate, SimConfig, simulate_passage, simulate_terminal
from .pipeline import DEFAULT_CONFIG, load_config, resolve_config, run_pipeline
from .wienerhopf import (WienerHopfFactor, down_crossing_transform,
                         first_passage_transform, kappa_roots, wh_plus_factor)

__all__ = [
    "CalibrationResult", "OptionQuote", "calibrate", "european_price",
    "DiscountCurve", "EdsContract", "EdsQuote", "accrual_days", "eds_rate",
    "swap_value", "CalibrationError", "ConfigError", "EdsLevyError", "FitError",
    "InversionError", "NumericalError", "PricingError", "RootFindingError",
    "CgmyParams", "ExpMixtureFit", "build_two_sided_density",
    "fit_exponential_mixture", "preset_fit", "PRESET_NODES", "PRESET_STARTS",
    "EulerInversionParams", "FirstPassageCurve", "invert", "passage_curve",
    "DiffusionConfig", "HyperExpLevyModel", "build_model", "risk_neutral_drift",
    "small_jump_variance", "PassageEstimate", "SimConfig", "simulate_passage",
    "simulate_terminal", "DEFAULT_CONFIG", "load_config", "resolve_config",
    "run_pipeline", "WienerHopfFactor", "down_crossing_transform",
    "first_passage_transform", "kappa_roots", "wh_plus_factor",
]
