"""European option pricing by damped Fourier inversion and model calibration.

Prices come from the model's own exponent: E[exp(i v X_t)] = exp(t kappa(iv)),
integrated along a damped contour (Carr-Madan form).  Calibration fits
(C, G, M) with Y frozen by minimizing the RMSE between quoted and model
prices, the same simplex family as the mixture fitter, on log-transformed
parameters to keep C > 0, G > 0, M > 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import exp, log

import numpy as np
from scipy.optimize import minimize

from .errors import CalibrationError, ConfigError, PricingError
from .hyperexp import CgmyParams, ExpMixtureFit, preset_fit
from .levymodel import DiffusionConfig, HyperExpLevyModel, build_model

_PANEL_WIDTH = 15.0
_PANEL_NODES = 96
_MAX_PANELS = 400
_TAIL_RUN = 3          # consecutive negligible panels that end the integral


@dataclass(frozen=True)
class OptionQuote:
    strike: float
    maturity: float
    price: float
    is_call: bool = True
    spot: float = 1.0
    rate: float = 0.0
    dividend_yield: float = 0.0

    def __post_init__(self):
        if self.maturity <= 0:
            raise ConfigError(f"quote maturity must be positive, got {self.maturity}")
        if self.strike <= 0 or self.spot <= 0:
            raise ConfigError("strike and spot must be positive")

    def intrinsic_bound(self):
        fwd = self.spot * exp(-self.dividend_yield * self.maturity)
        disc_k = self.strike * exp(-self.rate * self.maturity)
        return max(0.0, fwd - disc_k) if self.is_call else max(0.0, disc_k - fwd)

    def upper_bound(self):
        if self.is_call:
            return self.spot * exp(-self.dividend_yield * self.maturity)
        return self.strike * exp(-self.rate * self.maturity)


def _require_risk_neutral(model, r, q):
    defect = abs(model.kappa(1.0) - (r - q))
    if defect > 1e-8:
        raise ConfigError(f"model is not risk-neutral: |kappa(1) - (r-q)| = {defect:.2e}")


def _damping(model, damping):
    alpha_min = model.alpha.min() if len(model.pos_terms) else np.inf
    if damping is None:
        damping = 1.5 if alpha_min - 1.0 > 3.0 else 0.5 * (alpha_min - 1.0)
    if not 0.0 < damping < alpha_min - 1.0:
        raise PricingError(
            f"damping must lie in (0, {alpha_min - 1.0:.4g}), got {damping}")
    return damping


def _call_values(model, spot, strikes, T, r, q, damping, tol):
    """Damped-Fourier call prices for a strike vector at one maturity.

    The integral is written in log-moneyness (strike relative to spot), which
    keeps the oscillation frequency small.  Gauss-Legendre panels are
    accumulated until the tail is negligible, then the whole integral is
    re-done at doubled node count; disagreement beyond tol means
    non-convergence.
    """
    eta = _damping(model, damping)
    k = np.log(np.asarray(strikes, dtype=float) / spot)

    def psi(u):
        v = u - 1j * (eta + 1.0)
        phi = np.exp(T * model.kappa(1j * v))
        return exp(-r * T) * phi / (eta * eta + eta - u * u + 1j * (2.0 * eta + 1.0) * u)

    def integral(nodes_per_panel):
        base_x, base_w = np.polynomial.legendre.leggauss(nodes_per_panel)
        total = np.zeros_like(k)
        quiet = 0
        for p in range(_MAX_PANELS):
            lo = p * _PANEL_WIDTH
            u = lo + (base_x + 1.0) * (_PANEL_WIDTH / 2.0)
            w = base_w * (_PANEL_WIDTH / 2.0)
            vals = psi(u)
            contrib = (np.exp(-1j * np.outer(k, u)) * vals * w).real.sum(axis=1)
            total += contrib
            if np.abs(contrib).max() < 0.01 * tol:
                quiet += 1
                if quiet >= _TAIL_RUN:
                    return total, True
            else:
                quiet = 0
        return total, False

    coarse, ok1 = integral(_PANEL_NODES)
    fine, ok2 = integral(2 * _PANEL_NODES)
    if not (ok1 and ok2):
        raise PricingError(f"Fourier integral tail did not converge within "
                           f"{_MAX_PANELS} panels (sigma2 = {model.sigma2:.3g})")
    if np.abs(fine - coarse).max() > tol:
        raise PricingError("Fourier integral is not stable under node doubling")
    return spot * np.exp(-eta * k) / np.pi * fine


def european_price(model: HyperExpLevyModel, spot, strike, maturity, r, q=0.0,
                   is_call=True, damping=None, tol=1e-8):
    """European option price under the assembled (risk-neutral) model."""
    if spot <= 0 or strike <= 0:
        raise ConfigError("spot and strike must be positive")
    _require_risk_neutral(model, r, q)
    call = float(_call_values(model, spot, np.array([strike]), maturity,
                              r, q, damping, tol)[0])
    if is_call:
        return call
    return call - spot * exp(-q * maturity) + strike * exp(-r * maturity)


@dataclass
class CalibrationResult:
    params: CgmyParams
    rmse: float
    iterations: int
    residuals: np.ndarray = field(repr=False)
    converged: bool = True


def _price_quotes(quotes, y, c, g, m, fit, diffusion, damping, tol):
    params = CgmyParams(c=c, g=g, m=m, y=y)
    groups = {}
    for i, qt in enumerate(quotes):
        groups.setdefault((qt.maturity, qt.spot, qt.rate, qt.dividend_yield), []).append(i)
    out = np.empty(len(quotes))
    models = {}
    for (T, spot, r, q), idx in groups.items():
        key = (r, q)
        if key not in models:
            models[key] = build_model(params, fit, r, q, diffusion=diffusion)
        model = models[key]
        strikes = np.array([quotes[i].strike for i in idx])
        calls = _call_values(model, spot, strikes, T, r, q, damping, tol)
        for j, i in enumerate(idx):
            qt = quotes[i]
            out[i] = calls[j] if qt.is_call else \
                calls[j] - spot * exp(-q * T) + qt.strike * exp(-r * T)
    return out


def calibrate(quotes, y, initial, fit: ExpMixtureFit | None = None,
              diffusion: DiffusionConfig | None = DiffusionConfig(),
              maturity_band=(1.0, 2.0), damping=None, price_tol=1e-8,
              max_iter=4000, xatol=1e-8, fatol=1e-14):
    """Fit (C, G, M) at frozen Y to quoted European prices by RMSE.

    ``initial`` is a (C, G, M) triple or CgmyParams.  Quotes failing the
    arbitrage bounds are rejected by index; maturities must lie in
    ``maturity_band`` (pass None to disable the band).
    """
    quotes = list(quotes)
    if len(quotes) < 3:
        raise ConfigError(f"calibration needs at least 3 quotes, got {len(quotes)}")
    strikes_mats = {(q.strike, q.maturity) for q in quotes}
    if len(strikes_mats) < 3:
        raise ConfigError("quotes are degenerate: fewer than 3 distinct "
                          "(strike, maturity) points for 3 free parameters")
    if maturity_band is not None:
        off = [i for i, q in enumerate(quotes)
               if not maturity_band[0] <= q.maturity <= maturity_band[1]]
        if off:
            raise ConfigError(f"quotes {off} outside maturity band {maturity_band}")
    bad = [i for i, q in enumerate(quotes)
           if not q.intrinsic_bound() - 1e-12 <= q.price <= q.upper_bound() + 1e-12]
    if bad:
        raise ConfigError(f"quotes {bad} violate arbitrage bounds")

    if fit is None:
        if abs(y - 0.5) > 1e-12:
            raise ConfigError("no preset mixture for Y != 0.5; supply a fit")
        fit = preset_fit()
    if isinstance(initial, CgmyParams):
        c0, g0, m0 = initial.c, initial.g, initial.m
    else:
        c0, g0, m0 = initial
    if min(c0, g0) <= 0 or m0 <= 1:
        raise ConfigError("initial parameters must satisfy C > 0, G > 0, M > 1")

    target = np.array([q.price for q in quotes])

    def rmse(theta):
        c, g, m = exp(theta[0]), exp(theta[1]), 1.0 + exp(theta[2])
        try:
            prices = _price_quotes(quotes, y, c, g, m, fit, diffusion,
                                   damping, price_tol)
        except (PricingError, ConfigError):
            return 1e6
        return float(np.sqrt(((prices - target) ** 2).mean()))

    theta0 = np.array([log(c0), log(g0), log(m0 - 1.0)])
    res = minimize(rmse, theta0, method="Nelder-Mead",
                   options=dict(maxiter=max_iter, maxfev=max_iter,
                                xatol=xatol, fatol=fatol))
    c, g, m = exp(res.x[0]), exp(res.x[1]), 1.0 + exp(res.x[2])
    params = CgmyParams(c=c, g=g, m=m, y=y)
    if not res.success:
        raise CalibrationError(
            f"calibration did not converge within {max_iter} iterations",
            best_params=params, best_rmse=float(res.fun))
    prices = _price_quotes(quotes, y, c, g, m, fit, diffusion, damping, price_tol)
    return CalibrationResult(params=params, rmse=float(res.fun),
                             iterations=int(res.nit), residuals=prices - target)
