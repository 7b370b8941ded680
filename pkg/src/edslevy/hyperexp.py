"""Exponential-mixture approximation of the tempered power-law jump kernel.

The two-sided jump density C e^{-M x} / x^{1+Y} (up) and C e^{-G|x|} / |x|^{1+Y}
(down) is completely monotone, so 1/x^{1+Y} can be written as a Gamma-integral
over exponentials and approximated by a finite mixture

    1/x^{1+Y}  ~  sum_i  u_i^Y (u_{i+1} - u_i) / Gamma(1+Y) * exp(-u_i x).

Shifting each decay rate by the tempering parameter then gives the two-sided
hyperexponential density used by the rest of the pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma

import numpy as np
from scipy.optimize import minimize

from .errors import ConfigError, FitError

# Fitted decay rates for Y = 0.5 shipped as a preset, with the starting values
# and grid they were derived from.  The preset is used by default everywhere;
# the fitter below exists for other exponents.
PRESET_NODES = (0.1940, 0.5982, 0.8434, 1.1399, 1.5308, 2.1211, 3.4055)
PRESET_STARTS = (0.5, 2.0, 5.0, 10.0, 20.0, 40.0, 100.0)
DEFAULT_GRID = (0.25, 5.0, 0.025)

# The mixture needs one spacing beyond the last node.  Default: the spacing of
# the starting grid, (100 - 40), carried over proportionally to the last node
# (60/100 = 0.6 of it).  Overridable with an absolute spacing.
TERMINAL_RATIO = 0.6


@dataclass(frozen=True)
class CgmyParams:
    """Risk-neutral jump parameters: intensity scale c, tempering g (left) and
    m (right), fine-structure exponent y."""

    c: float
    g: float
    m: float
    y: float

    def __post_init__(self):
        if self.c < 0:
            raise ConfigError(f"C must be positive, got {self.c}")
        if self.g <= 0 or self.m <= 0:
            raise ConfigError(f"G and M must be positive, got G={self.g}, M={self.m}")
        if not 0 < self.y < 1:
            raise ConfigError(f"Y must lie in (0, 1), got {self.y}")

    def require_equity_pricing(self):
        """M > 1 is needed for E[exp(X_1)] to exist (risk-neutral pricing)."""
        if self.m <= 1:
            raise ConfigError(f"M must exceed 1 for risk-neutral pricing, got {self.m}")


@dataclass(frozen=True)
class ExpMixtureFit:
    """Result of fitting 1/x^{1+y} by sum_i weights[i] * exp(-nodes[i] x)."""

    y: float
    nodes: tuple
    weights: tuple
    fit_grid: tuple
    residual_norm: float
    iterations: int = 0

    def __post_init__(self):
        nodes = np.asarray(self.nodes)
        if not (np.all(np.diff(nodes) > 0) and np.all(nodes > 0)):
            raise ConfigError("mixture nodes must be positive and strictly increasing")
        if not np.all(np.asarray(self.weights) > 0):
            raise ConfigError("mixture weights must be positive")

    def value(self, x):
        """Evaluate the mixture at x (scalar or array)."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(self.nodes)
        w = np.asarray(self.weights)
        return (w * np.exp(-np.multiply.outer(x, u))).sum(axis=-1)

    def max_relative_error(self):
        """max over the fit grid of |mixture / x^{-1-y} - 1|."""
        x = np.asarray(self.fit_grid)
        return float(np.abs(self.value(x) * x ** (1.0 + self.y) - 1.0).max())


def make_grid(x_min=DEFAULT_GRID[0], x_max=DEFAULT_GRID[1], step=DEFAULT_GRID[2]):
    if x_min <= 0 or x_max <= x_min or step <= 0:
        raise ConfigError(f"invalid fit grid ({x_min}, {x_max}, {step})")
    n = int(round((x_max - x_min) / step))
    return x_min + step * np.arange(n + 1)


def mixture_weights(nodes, y, terminal_spacing=None):
    """Weights u_i^y (u_{i+1} - u_i) / Gamma(1+y) with a synthetic last spacing.

    ``terminal_spacing`` is the spacing assigned past the last node; None
    selects TERMINAL_RATIO times the last node.
    """
    u = np.asarray(nodes, dtype=float)
    if terminal_spacing is None:
        terminal_spacing = TERMINAL_RATIO * u[-1]
    if terminal_spacing <= 0:
        raise ConfigError(f"terminal spacing must be positive, got {terminal_spacing}")
    spacings = np.append(np.diff(u), terminal_spacing)
    return u ** y * spacings / gamma(1.0 + y)


def fit_objective(nodes, y, grid, terminal_spacing=None):
    """Sum of squared errors of the mixture against x^{-1-y} over the grid."""
    u = np.asarray(nodes, dtype=float)
    x = np.asarray(grid, dtype=float)
    w = mixture_weights(u, y, terminal_spacing)
    approx = (w * np.exp(-np.multiply.outer(x, u))).sum(axis=1)
    resid = x ** (-1.0 - y) - approx
    return float(resid @ resid)


def fit_exponential_mixture(y, initial_nodes, grid=None, terminal_spacing=None,
                            max_iter=20000, xatol=1e-10, fatol=1e-12):
    """Least-squares fit of the exponential mixture to x^{-1-y}.

    Runs a simplex search over log-nodes (positivity for free, ordering by
    projection) from ``initial_nodes``.  Raises FitError with the best iterate
    if the iteration budget is exhausted or the result violates ordering.
    """
    if not 0 < y < 1:
        raise ConfigError(f"Y must lie in (0, 1), got {y}")
    u0 = np.asarray(initial_nodes, dtype=float)
    if u0.ndim != 1 or len(u0) < 2:
        raise ConfigError("need at least two initial nodes")
    if not (np.all(u0 > 0) and np.all(np.diff(u0) > 0)):
        raise ConfigError("initial nodes must be positive and increasing")
    x = make_grid(*DEFAULT_GRID) if grid is None else np.asarray(grid, dtype=float)
    if len(x) == 0 or np.any(x <= 0):
        raise ConfigError("fit grid must be nonempty and positive")

    def objective(theta):
        return fit_objective(np.sort(np.exp(theta)), y, x, terminal_spacing)

    res = minimize(objective, np.log(u0), method="Nelder-Mead",
                   options=dict(maxiter=max_iter, maxfev=max_iter,
                                xatol=xatol, fatol=fatol))
    nodes = np.sort(np.exp(res.x))
    if not res.success:
        raise FitError(f"mixture fit did not converge within {max_iter} iterations: "
                       f"{res.message}", best_nodes=nodes, best_objective=res.fun)
    if not (np.all(nodes > 0) and np.all(np.diff(nodes) > 0)):
        raise FitError("optimizer returned degenerate nodes",
                       best_nodes=nodes, best_objective=res.fun)
    weights = mixture_weights(nodes, y, terminal_spacing)
    return ExpMixtureFit(y=y, nodes=tuple(nodes), weights=tuple(weights),
                         fit_grid=tuple(x), residual_norm=float(res.fun),
                         iterations=int(res.nit))


def preset_fit(terminal_spacing=None, grid=None):
    """The shipped node list for Y = 0.5 packaged as an ExpMixtureFit."""
    x = make_grid(*DEFAULT_GRID) if grid is None else np.asarray(grid, dtype=float)
    nodes = np.asarray(PRESET_NODES)
    weights = mixture_weights(nodes, 0.5, terminal_spacing)
    resid = fit_objective(nodes, 0.5, x, terminal_spacing)
    return ExpMixtureFit(y=0.5, nodes=tuple(nodes), weights=tuple(weights),
                         fit_grid=tuple(x), residual_norm=resid)


def build_two_sided_density(fit: ExpMixtureFit, params: CgmyParams):
    """Two-sided coefficient lists from a mixture fit.

    Returns (pos_terms, neg_terms) where pos_terms = [(a_i, M + u_i)] and
    neg_terms = [(b_i, G + u_i)] with a_i = b_i = C * weights[i].
    """
    if abs(fit.y - params.y) > 1e-12:
        raise ConfigError(f"fit exponent {fit.y} does not match params.y {params.y}")
    u = np.asarray(fit.nodes)
    coef = params.c * np.asarray(fit.weights)
    pos = tuple((float(ci), float(params.m + ui)) for ci, ui in zip(coef, u))
    neg = tuple((float(ci), float(params.g + ui)) for ci, ui in zip(coef, u))
    return pos, neg
