"""Equity default swap valuation from a daily first-passage curve.

The protection buyer receives notional * (1 - recovery) at the first drop of
the stock below the barrier and pays coupons at rate k on the schedule until
passage or maturity, minus an accrued-coupon adjustment at passage.  Setting
the initial value to zero gives the quoted rate in closed form:

    k = (1 - R) sum_n B_n pi_n
        / [ sum_j (np_j - np_{j-1})/360 * B_{np_j} * Fbar_{np_j}
          + sum_n accr(n)/360 * B_n * pi_n ]

where Fbar is daily survival and pi_n the per-day passage probability.  The
printed form of the accrual uses accr(n) = n - zeta(n) (the last coupon day);
the economically standard form uses zeta(n), the days since the last coupon.
Both are supported (``accrual`` argument), the printed one is the default.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .inversion import FirstPassageCurve

COUPON_FREQUENCIES = {"monthly": 30, "quarterly": 90, "semiannual": 180, "annual": 360}


@dataclass(frozen=True)
class EdsContract:
    notional: float
    recovery: float
    barrier: float
    maturity_years: float
    coupon_days: tuple   # strictly increasing day numbers, last <= N

    def __post_init__(self):
        if not 0.0 <= self.recovery <= 1.0:
            raise ConfigError(f"recovery must lie in [0, 1], got {self.recovery}")
        if not 0.0 < self.barrier < 1.0:
            raise ConfigError(f"barrier must lie in (0, 1), got {self.barrier}")
        if self.maturity_years <= 0:
            raise ConfigError(f"maturity must be positive, got {self.maturity_years}")
        days = np.asarray(self.coupon_days, dtype=int)
        if len(days) == 0 or np.any(np.diff(days) <= 0) or days[0] <= 0 \
                or days[-1] > self.n_days:
            raise ConfigError("coupon days must be strictly increasing within the term")

    @property
    def n_days(self):
        return int(round(360 * self.maturity_years))

    @classmethod
    def with_frequency(cls, barrier, recovery, maturity_years,
                       frequency="quarterly", notional=1.0):
        if frequency not in COUPON_FREQUENCIES:
            raise ConfigError(f"unknown coupon frequency {frequency!r}")
        step = COUPON_FREQUENCIES[frequency]
        n = int(round(360 * maturity_years))
        if n % step:
            raise ConfigError(f"{frequency} coupons do not divide a {n}-day term")
        return cls(notional=notional, recovery=recovery, barrier=barrier,
                   maturity_years=maturity_years,
                   coupon_days=tuple(range(step, n + 1, step)))


@dataclass(frozen=True)
class DiscountCurve:
    """Day-grid discount factors B_n, n = 1..N (B_0 = 1 implicit).

    Monotonicity (no-arbitrage under nonnegative rates) is enforced unless
    ``strict`` is switched off.
    """

    factors: np.ndarray
    strict: bool = True

    def __post_init__(self):
        f = np.asarray(self.factors, dtype=float)
        if np.any(f <= 0) or np.any(f > 1.0 + 1e-12):
            raise ConfigError("discount factors must lie in (0, 1]")
        if self.strict and np.any(np.diff(f) > 1e-12):
            raise ConfigError("discount factors must be non-increasing")
        object.__setattr__(self, "factors", f)

    def __len__(self):
        return len(self.factors)

    @classmethod
    def flat(cls, rate, n_days):
        n = np.arange(1, n_days + 1)
        return cls(factors=np.exp(-rate * n / 360.0))

    @classmethod
    def from_pillars(cls, pillar_days, pillar_factors, n_days):
        """Fill the day grid from sparse pillars with piecewise-constant forwards."""
        days = np.asarray(pillar_days, dtype=int)
        facs = np.asarray(pillar_factors, dtype=float)
        if len(days) == 0 or np.any(np.diff(days) <= 0) or days[0] <= 0:
            raise ConfigError("pillar days must be strictly increasing and positive")
        log_b = np.concatenate([[0.0], np.log(facs)])
        d = np.concatenate([[0], days])
        out = np.empty(n_days)
        for lo, hi, llo, lhi in zip(d[:-1], d[1:], log_b[:-1], log_b[1:]):
            fwd = (lhi - llo) / (hi - lo)
            span = np.arange(lo + 1, min(hi, n_days) + 1)
            out[span - 1] = np.exp(llo + fwd * (span - lo))
        if days[-1] < n_days:  # extrapolate flat forward
            fwd = (log_b[-1] - log_b[-2]) / (d[-1] - d[-2])
            span = np.arange(days[-1] + 1, n_days + 1)
            out[span - 1] = np.exp(log_b[-1] + fwd * (span - days[-1]))
        return cls(factors=out)

    @classmethod
    def from_csv(cls, path, n_days):
        days, facs = [], []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or \
                    [f.strip() for f in reader.fieldnames] != ["day", "discount"]:
                raise ConfigError("curve CSV must have header 'day,discount'")
            for row in reader:
                days.append(int(row["day"]))
                facs.append(float(row["discount"]))  # float() parses decimal exactly-rounded
        return cls.from_pillars(days, facs, n_days)


def accrual_days(n, coupon_days):
    """zeta(n): days since the most recent coupon on or before day n (day 0 counts)."""
    last = 0
    for d in coupon_days:
        if d <= n:
            last = d
        else:
            break
    return n - last


@dataclass(frozen=True)
class EdsQuote:
    rate: float
    rate_bp: float
    protection_leg: float
    coupon_leg_unit: float     # denominator of the closed form (per unit rate)
    survival_at_maturity: float
    accrual: str


def _legs(contract, curve, passage, accrual):
    N = contract.n_days
    if len(passage) < N or len(curve) < N:
        raise ConfigError(f"passage curve/discounts must cover all {N} days")
    n = np.arange(1, N + 1)
    B = curve.factors[:N]
    pi = passage.passage_prob[:N]
    Fbar = passage.survival[:N]
    cpn = np.asarray(contract.coupon_days, dtype=int)
    periods = np.diff(np.concatenate([[0], cpn])) / 360.0

    last_coupon = np.zeros(N, dtype=int)
    for d in cpn:
        last_coupon[d - 1:] = d
    zeta = n - last_coupon
    accr = zeta if accrual == "since_last_coupon" else n - zeta
    if accrual not in ("printed", "since_last_coupon"):
        raise ConfigError(f"unknown accrual convention {accrual!r}")

    protection = (1.0 - contract.recovery) * float((B * pi).sum())
    coupon_unit = float((periods * B[cpn - 1] * Fbar[cpn - 1]).sum()
                        + (accr / 360.0 * B * pi).sum())
    return protection, coupon_unit, float(Fbar[-1])


def eds_rate(contract: EdsContract, curve: DiscountCurve,
             passage: FirstPassageCurve, accrual="printed"):
    """Zero-initial-value swap rate (annualized; also reported in basis points)."""
    protection, coupon_unit, surv = _legs(contract, curve, passage, accrual)
    if coupon_unit <= 0:
        raise NumericalError(
            f"degenerate contract: coupon leg denominator {coupon_unit:.3e}")
    rate = protection / coupon_unit
    return EdsQuote(rate=rate, rate_bp=rate * 1e4, protection_leg=protection,
                    coupon_leg_unit=coupon_unit, survival_at_maturity=surv,
                    accrual=accrual)


def swap_value(contract: EdsContract, curve: DiscountCurve,
               passage: FirstPassageCurve, rate, accrual="printed"):
    """Expected present value of the swap at a given coupon rate.

    Term-by-term evaluation of receipts minus payments; independent of the
    closed-form rate, so pricing at the solved rate must return ~0.
    """
    N = contract.n_days
    n = np.arange(1, N + 1)
    B = curve.factors[:N]
    pi = passage.passage_prob[:N]
    Fbar = passage.survival[:N]
    cpn = np.asarray(contract.coupon_days, dtype=int)
    periods = np.diff(np.concatenate([[0], cpn])) / 360.0

    last_coupon = np.zeros(N, dtype=int)
    for d in cpn:
        last_coupon[d - 1:] = d
    zeta = n - last_coupon
    accr = zeta if accrual == "since_last_coupon" else n - zeta

    M = contract.notional
    receipts = ((M * (1.0 - contract.recovery) - M * rate * accr / 360.0) * B * pi).sum()
    payments = (M * rate * periods * B[cpn - 1] * Fbar[cpn - 1]).sum()
    return float(receipts - payments)
