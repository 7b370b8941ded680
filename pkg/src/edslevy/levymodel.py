"""Assembly and evaluation of the approximating jump-diffusion model.

The model is a Levy process with two-sided hyperexponential jumps

    k(x) = sum_i a_i e^{-alpha_i x} (x > 0)  +  sum_j b_j e^{-beta_j |x|} (x < 0),

a Brownian component sigma^2 replacing the truncated small jumps, and a drift
mu.  Its log-moment generating function (characteristic exponent) is rational:

    kappa(s) = mu s + sigma^2 s^2 / 2
             - sum_i a_i / (s - alpha_i) + sum_j b_j / (s + beta_j)
             - (lambda_plus + lambda_minus)

with lambda_plus = sum a_i/alpha_i, lambda_minus = sum b_j/beta_j, so that
kappa(0) = 0 exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError, NumericalError
from .hyperexp import CgmyParams, ExpMixtureFit, build_two_sided_density

POLE_GUARD = 1e-9  # evaluation this close to a pole is refused


@dataclass(frozen=True)
class DiffusionConfig:
    """Small-jump replacement: truncation level and quadrature budget."""

    cutoff: float = 0.25
    quad_limit: int = 200

    def __post_init__(self):
        if self.cutoff <= 0:
            raise ConfigError(f"cutoff must be positive, got {self.cutoff}")


@dataclass(frozen=True)
class HyperExpLevyModel:
    pos_terms: tuple       # ((a_i, alpha_i), ...)
    neg_terms: tuple       # ((b_j, beta_j), ...)
    sigma2: float
    mu: float
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for terms, side in ((self.pos_terms, "positive"), (self.neg_terms, "negative")):
            rates = [r for _, r in terms]
            if any(r <= 0 for r in rates):
                raise ConfigError(f"{side} decay rates must be positive")
            if any(c < 0 for c, _ in terms):
                raise ConfigError(f"{side} intensities must be nonnegative")
            if len(set(rates)) != len(rates):
                raise ConfigError(f"{side} decay rates must be distinct")
        if self.sigma2 < 0:
            raise ConfigError(f"sigma2 must be nonnegative, got {self.sigma2}")

    # -- derived arrays -------------------------------------------------

    @property
    def a(self):
        return np.array([c for c, _ in self.pos_terms])

    @property
    def alpha(self):
        return np.array([r for _, r in self.pos_terms])

    @property
    def b(self):
        return np.array([c for c, _ in self.neg_terms])

    @property
    def beta(self):
        return np.array([r for _, r in self.neg_terms])

    @property
    def lambda_pos(self):
        return float((self.a / self.alpha).sum()) if self.pos_terms else 0.0

    @property
    def lambda_neg(self):
        return float((self.b / self.beta).sum()) if self.neg_terms else 0.0

    @property
    def pi_pos(self):
        lam = self.lambda_pos
        return self.a / self.alpha / lam if lam > 0 else np.zeros(len(self.pos_terms))

    @property
    def pi_neg(self):
        lam = self.lambda_neg
        return self.b / self.beta / lam if lam > 0 else np.zeros(len(self.neg_terms))

    # -- evaluation ------------------------------------------------------

    def kappa(self, s):
        """Characteristic exponent kappa(s); s scalar or array, real or complex.

        Raises NumericalError when s coincides with a pole (alpha_i or -beta_j).
        """
        s_arr = np.asarray(s, dtype=complex)
        scalar = s_arr.ndim == 0
        sv = np.atleast_1d(s_arr)
        out = self.mu * sv + 0.5 * self.sigma2 * sv * sv \
            - (self.lambda_pos + self.lambda_neg)
        for coefs, rates, sign in ((self.a, self.alpha, -1.0), (self.b, self.beta, 1.0)):
            if len(coefs) == 0:
                continue
            den = sv[None, :] - rates[:, None] if sign < 0 else sv[None, :] + rates[:, None]
            bad = np.abs(den) < POLE_GUARD * (1.0 + rates[:, None])
            if bad.any():
                i, _ = np.nonzero(bad)
                pole = rates[i[0]] if sign < 0 else -rates[i[0]]
                raise NumericalError(f"kappa evaluated at pole s = {pole}")
            out = out + sign * (coefs[:, None] / den).sum(axis=0)
        return complex(out[0]) if scalar else out.reshape(s_arr.shape)

    def kappa_prime(self, s):
        """d kappa / d s, same conventions as kappa."""
        s_arr = np.asarray(s, dtype=complex)
        scalar = s_arr.ndim == 0
        sv = np.atleast_1d(s_arr)
        out = self.mu + self.sigma2 * sv
        if len(self.pos_terms):
            out = out + (self.a[:, None] / (sv[None, :] - self.alpha[:, None]) ** 2).sum(axis=0)
        if len(self.neg_terms):
            out = out - (self.b[:, None] / (sv[None, :] + self.beta[:, None]) ** 2).sum(axis=0)
        return complex(out[0]) if scalar else out.reshape(s_arr.shape)

    def reflect(self):
        """Model of -X: sides swapped, drift negated, sigma2 unchanged."""
        return HyperExpLevyModel(pos_terms=self.neg_terms, neg_terms=self.pos_terms,
                                 sigma2=self.sigma2, mu=-self.mu,
                                 provenance=dict(self.provenance, reflected=True))

    # -- serialization ---------------------------------------------------

    def to_dict(self):
        return {
            "pos_terms": [list(t) for t in self.pos_terms],
            "neg_terms": [list(t) for t in self.neg_terms],
            "sigma2": self.sigma2,
            "mu": self.mu,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, doc):
        known = {"pos_terms", "neg_terms", "sigma2", "mu", "provenance"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown model fields: {sorted(unknown)}")
        return cls(pos_terms=tuple(tuple(t) for t in doc["pos_terms"]),
                   neg_terms=tuple(tuple(t) for t in doc["neg_terms"]),
                   sigma2=float(doc["sigma2"]), mu=float(doc["mu"]),
                   provenance=doc.get("provenance", {}))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# -- diffusion correction ---------------------------------------------------


def _side_variance(c_scale, temper, coefs, rates, y, cfg: DiffusionConfig):
    """integral_0^eps x^2 [ c e^{-temper x} x^{-1-y} - sum coefs e^{-rates x} ] dx.

    The first integrand is c x^{1-y} e^{-temper x}; its derivative is unbounded
    at 0, so it is integrated under the substitution v = x^{2-y} which makes it
    smooth.  The mixture part is smooth and integrated directly.
    """
    eps = cfg.cutoff
    p = 2.0 - y

    def singular(v):
        return np.exp(-temper * v ** (1.0 / p)) / p

    true_part, _ = quad(singular, 0.0, eps ** p, limit=cfg.quad_limit,
                        epsabs=1e-14, epsrel=1e-12)
    true_part *= c_scale

    coefs = np.asarray(coefs, dtype=float)
    rates = np.asarray(rates, dtype=float)

    def mixture(x):
        return x * x * (coefs * np.exp(-rates * x)).sum()

    mix_part, _ = quad(mixture, 0.0, eps, limit=cfg.quad_limit,
                       epsabs=1e-14, epsrel=1e-12)
    if not (np.isfinite(true_part) and np.isfinite(mix_part)):
        raise NumericalError("small-jump variance quadrature did not converge")
    return true_part - mix_part


def small_jump_variance(params: CgmyParams, pos_terms, neg_terms,
                        cfg: DiffusionConfig = DiffusionConfig()):
    """Variance of the truncated small-jump residual, both sides.

    The residual kernel is the difference between the true tempered power-law
    density and the mixture on (-eps, eps); it may be locally negative, but a
    negative total variance is an error.
    """
    if not 0 < params.y < 1:
        raise ConfigError("diffusion approximation requires 0 < Y < 1")
    pos = _side_variance(params.c, params.m, [c for c, _ in pos_terms],
                         [r for _, r in pos_terms], params.y, cfg)
    neg = _side_variance(params.c, params.g, [c for c, _ in neg_terms],
                         [r for _, r in neg_terms], params.y, cfg)
    total = pos + neg
    if total < 0:
        raise NumericalError(
            f"negative residual variance {total:.3e} at cutoff {cfg.cutoff}: "
            "the mixture overshoots the true density on the truncation interval")
    return total


def small_jump_variance_sides(params, pos_terms, neg_terms,
                              cfg: DiffusionConfig = DiffusionConfig()):
    """Per-side contributions (positive, negative), for diagnostics."""
    pos = _side_variance(params.c, params.m, [c for c, _ in pos_terms],
                         [r for _, r in pos_terms], params.y, cfg)
    neg = _side_variance(params.c, params.g, [c for c, _ in neg_terms],
                         [r for _, r in neg_terms], params.y, cfg)
    return pos, neg


# -- drift conventions -------------------------------------------------------


def risk_neutral_drift(pos_terms, neg_terms, sigma2, r, q=0.0):
    """Drift mu solving kappa(1) = r - q (discounted stock a martingale).

    Requires every positive decay rate above 1, otherwise E[exp(X_1)] blows up.
    """
    a = np.array([c for c, _ in pos_terms])
    alpha = np.array([rr for _, rr in pos_terms])
    b = np.array([c for c, _ in neg_terms])
    beta = np.array([rr for _, rr in neg_terms])
    if np.any(alpha <= 1):
        raise ConfigError(f"risk-neutral drift needs all alpha_i > 1, "
                          f"got min alpha = {alpha.min() if len(alpha) else 'n/a'}")
    pos_comp = float((a / (alpha * (alpha - 1.0))).sum()) if len(a) else 0.0
    neg_comp = float((b / (beta * (beta + 1.0))).sum()) if len(b) else 0.0
    return (r - q) - 0.5 * sigma2 - pos_comp + neg_comp


def build_model(params: CgmyParams, fit: ExpMixtureFit, r, q=0.0,
                diffusion: DiffusionConfig | None = DiffusionConfig(),
                drift_mode="risk_neutral", fit_id=None):
    """Assemble the full model: density terms, sigma2, drift, provenance.

    diffusion=None switches the Brownian correction off.  drift_mode
    "risk_neutral" solves kappa(1) = r - q; "rate_only" sets mu = r - q
    literally with no compensation (reproduces the stylized published rates,
    see README) and is not a martingale convention.
    """
    pos, neg = build_two_sided_density(fit, params)
    sigma2 = 0.0 if diffusion is None else small_jump_variance(params, pos, neg, diffusion)
    if drift_mode == "risk_neutral":
        params.require_equity_pricing()
        mu = risk_neutral_drift(pos, neg, sigma2, r, q)
    elif drift_mode == "rate_only":
        mu = r - q
    else:
        raise ConfigError(f"unknown drift_mode {drift_mode!r}")
    provenance = {
        "cgmy": {"c": params.c, "g": params.g, "m": params.m, "y": params.y},
        "fit_id": fit_id or f"nodes-{len(fit.nodes)}-y{fit.y}",
        "rate": r, "dividend_yield": q,
        "diffusion_cutoff": None if diffusion is None else diffusion.cutoff,
        "drift_mode": drift_mode,
    }
    return HyperExpLevyModel(pos_terms=pos, neg_terms=neg, sigma2=sigma2, mu=mu,
                             provenance=provenance)
