"""Closed-form Wiener-Hopf factors from the roots of kappa(s) = a.

kappa is rational, kappa(s) = p(s)/q(s) with

    q(s) = prod_i (alpha_i - s) prod_j (beta_j + s),

so the roots of kappa(s) = a are the roots of the polynomial p(s) - a q(s).
With sigma^2 > 0 there are n+1 roots in the open right half-plane and m+1 in
the left; the positive-supremum factor is

    phi_a_plus(s) = prod_i (1 - s/alpha_i) / prod_k (1 - s/rho_k)

over the right-half-plane roots rho_k, with partial-fraction coefficients

    A_k = prod_j (1 - rho_k/alpha_j) / prod_{l != k} (1 - rho_k/rho_l).

The Laplace transform (in a) of the first-passage probability P(T_x < t) and
of the passage density follow as sums of A_k exp(-rho_k x).

Root finding: the polynomial is built by exact complex coefficient arithmetic
and solved via companion-matrix eigenvalues, then every root is polished by a
guarded Newton iteration on kappa(s) - a directly.  For large |a| the roots
crowd the poles of kappa and the expanded-coefficient route loses them; those
rows are redone from asymptotic starts (one root adjacent to each pole plus
the one or two outer roots of the drift/diffusion part), and residuals of
pole-adjacent roots are evaluated in the pole-offset variable to avoid
cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import ConfigError, RootFindingError
from .levymodel import HyperExpLevyModel

RESID_RTOL = 1e-10        # |kappa(rho) - a| <= RESID_RTOL * (1 + |a|)
DISTINCT_RTOL = 1e-10     # minimum allowed pairwise root separation
AXIS_GUARD = 1e-12        # |Re rho| below this (relative) is a classification failure
_NEAR_POLE = 1e-3         # switch to pole-offset evaluation below this distance
_CHUNK = 4096


# -- model-level structure ----------------------------------------------------


def expected_root_counts(model: HyperExpLevyModel):
    """(total degree, number of right-half-plane roots) for kappa(s) = a."""
    n, m = len(model.pos_terms), len(model.neg_terms)
    if model.sigma2 > 0:
        return n + m + 2, n + 1
    if model.mu != 0:
        return n + m + 1, (n + 1 if model.mu > 0 else n)
    return n + m, n


def _rational_polys(model: HyperExpLevyModel):
    """Coefficient arrays (ascending) of p and q with kappa = p/q."""
    qa = np.array([1.0])
    for al in model.alpha:
        qa = npoly.polymul(qa, [al, -1.0])
    qb = np.array([1.0])
    for be in model.beta:
        qb = npoly.polymul(qb, [be, 1.0])
    q = npoly.polymul(qa, qb)

    lam = model.lambda_pos + model.lambda_neg
    if model.sigma2 > 0:
        drift_part = np.array([-lam, model.mu, 0.5 * model.sigma2])
    elif model.mu != 0:
        drift_part = np.array([-lam, model.mu])
    else:
        drift_part = np.array([-lam])
    p = npoly.polymul(q, drift_part)

    for i, (ai, _) in enumerate(model.pos_terms):
        qa_i = np.array([1.0])
        for k, al in enumerate(model.alpha):
            if k != i:
                qa_i = npoly.polymul(qa_i, [al, -1.0])
        p = npoly.polyadd(p, ai * npoly.polymul(qa_i, qb))
    for j, (bj, _) in enumerate(model.neg_terms):
        qb_j = np.array([1.0])
        for k, be in enumerate(model.beta):
            if k != j:
                qb_j = npoly.polymul(qb_j, [be, 1.0])
        p = npoly.polyadd(p, bj * npoly.polymul(qa, qb_j))
    return np.asarray(p, dtype=complex), np.asarray(q, dtype=complex)


# -- unguarded vectorized evaluation (internal; poles yield inf, not raise) --


def _kappa_flat(model, s):
    out = model.mu * s + 0.5 * model.sigma2 * s * s \
        - (model.lambda_pos + model.lambda_neg)
    if len(model.pos_terms):
        out = out - (model.a[:, None] / (s[None, :] - model.alpha[:, None])).sum(axis=0)
    if len(model.neg_terms):
        out = out + (model.b[:, None] / (s[None, :] + model.beta[:, None])).sum(axis=0)
    return out


def _kappa_prime_flat(model, s):
    out = model.mu + model.sigma2 * s + np.zeros_like(s)
    if len(model.pos_terms):
        out = out + (model.a[:, None] / (s[None, :] - model.alpha[:, None]) ** 2).sum(axis=0)
    if len(model.neg_terms):
        out = out - (model.b[:, None] / (s[None, :] + model.beta[:, None]) ** 2).sum(axis=0)
    return out


def _pole_data(model):
    """Poles of kappa and the coefficient c in kappa ~ c/(s - pole)."""
    poles = np.concatenate([model.alpha, -model.beta])
    coefs = np.concatenate([-model.a, model.b])
    return poles, coefs


def _kappa_skip(model, s, skip_idx):
    """kappa(s) without the pole term skip_idx (regular at that pole)."""
    poles, coefs = _pole_data(model)
    out = model.mu * s + 0.5 * model.sigma2 * s * s \
        - (model.lambda_pos + model.lambda_neg)
    for k, (pk, ck) in enumerate(zip(poles, coefs)):
        if k == skip_idx:
            continue
        out = out + ck / (s - pk)
    return out


# -- root solving -------------------------------------------------------------


def _guarded_newton(model, roots, a_col, iters, early_tol=None):
    """Newton on kappa(s) - a keeping the best-residual iterate per root."""
    cur = roots
    resid = np.abs(_kappa_flat(model, cur.ravel()).reshape(cur.shape) - a_col)
    resid[~np.isfinite(resid)] = np.inf
    best, best_resid = cur.copy(), resid.copy()
    for _ in range(iters):
        if early_tol is not None and np.all(best_resid <= early_tol):
            break
        f = _kappa_flat(model, cur.ravel()).reshape(cur.shape) - a_col
        fp = _kappa_prime_flat(model, cur.ravel()).reshape(cur.shape)
        step = f / fp
        step[~np.isfinite(step)] = 0.0
        cur = cur - step
        resid = np.abs(_kappa_flat(model, cur.ravel()).reshape(cur.shape) - a_col)
        resid[~np.isfinite(resid)] = np.inf
        better = resid < best_resid
        best[better] = cur[better]
        best_resid[better] = resid[better]
    return best, best_resid


def _refine_near_poles(model, roots, a_col, resid):
    """Re-solve pole-adjacent roots in the offset variable delta = s - pole.

    Near a pole, kappa(s) = c/delta + R(delta) with R regular, so the root
    satisfies delta = c / (a - R(delta)); iterating this is stable and the
    residual can be formed without the cancellation of s - pole.
    """
    poles, coefs = _pole_data(model)
    a_full = np.broadcast_to(a_col, roots.shape)
    for k, (pole, ck) in enumerate(zip(poles, coefs)):
        if ck == 0:
            continue
        mask = np.abs(roots - pole) < _NEAR_POLE * (1.0 + abs(pole))
        if not mask.any():
            continue
        a_m = a_full[mask]
        delta = roots[mask] - pole
        for _ in range(4):
            reg = _kappa_skip(model, pole + delta, k)
            delta = ck / (a_m - reg)
        new_resid = np.abs(ck / delta + _kappa_skip(model, pole + delta, k) - a_m)
        better = new_resid < resid[mask]
        idx = np.nonzero(mask)
        rows, cols = idx[0][better], idx[1][better]
        roots[rows, cols] = pole + delta[better]
        resid[rows, cols] = new_resid[better]
    return roots, resid


def _asymptotic_starts(model, a, degree):
    """Root starts valid for large |a|: one per pole plus the outer root(s)."""
    poles, coefs = _pole_data(model)
    starts = []
    for k, (pole, ck) in enumerate(zip(poles, coefs)):
        reg = _kappa_skip(model, np.array([pole + ck / a if a != 0 else pole + 1e-6]), k)[0]
        starts.append(pole + ck / (a - reg))
    lam = model.lambda_pos + model.lambda_neg
    if model.sigma2 > 0:
        disc = np.sqrt(model.mu ** 2 + 2.0 * model.sigma2 * (a + lam))
        starts += [(-model.mu + disc) / model.sigma2, (-model.mu - disc) / model.sigma2]
    elif model.mu != 0:
        starts.append((a + lam) / model.mu)
    starts = np.array(starts, dtype=complex)
    if len(starts) != degree:
        raise RootFindingError(
            f"degree mismatch: expected {degree} roots, structured starts give {len(starts)}")
    return starts


def _validate_rows(model, roots, resid, a_flat, k_plus):
    """Boolean mask of rows passing residual / count / distinctness checks."""
    tol = RESID_RTOL * (1.0 + np.abs(a_flat))[:, None]
    ok = np.all(np.isfinite(roots), axis=1) & np.all(resid <= tol, axis=1)
    guard = AXIS_GUARD * (1.0 + np.abs(roots))
    on_axis = np.abs(roots.real) < guard
    ok &= ~on_axis.any(axis=1)
    ok &= (roots.real > 0).sum(axis=1) == k_plus
    if roots.shape[1] > 1:
        diff = np.abs(roots[:, :, None] - roots[:, None, :])
        diff[:, np.arange(roots.shape[1]), np.arange(roots.shape[1])] = np.inf
        scale = np.maximum(1.0, np.abs(roots).max(axis=1))
        ok &= diff.min(axis=(1, 2)) > DISTINCT_RTOL * scale
    return ok


def _roots_many(model: HyperExpLevyModel, a_flat):
    """All roots of kappa(s) = a for each a in a_flat; shape (len(a), degree)."""
    degree, k_plus = expected_root_counts(model)
    if degree == 0:
        return np.empty((len(a_flat), 0), dtype=complex)
    p, q = _rational_polys(model)
    if len(p) - 1 != degree:
        raise RootFindingError(
            f"degree mismatch: built polynomial of degree {len(p) - 1}, expected {degree}")
    pc = np.zeros(degree + 1, dtype=complex)
    pc[:len(p)] = p
    qc = np.zeros(degree + 1, dtype=complex)
    qc[:len(q)] = q

    out = np.empty((len(a_flat), degree), dtype=complex)
    eye = np.eye(degree - 1) if degree > 1 else None
    for lo in range(0, len(a_flat), _CHUNK):
        av = a_flat[lo:lo + _CHUNK]
        coef = pc[None, :] - av[:, None] * qc[None, :]
        lead = coef[:, -1]
        if np.any(np.abs(lead) <= 1e-300):
            raise RootFindingError("degree mismatch: vanishing leading coefficient")
        if degree == 1:
            roots = (-coef[:, 0] / lead)[:, None]
        else:
            comp = np.zeros((len(av), degree, degree), dtype=complex)
            comp[:, 1:, :-1] = eye
            comp[:, :, -1] = -coef[:, :-1] / lead[:, None]
            roots = np.linalg.eigvals(comp)
        a_col = av[:, None]
        roots, resid = _guarded_newton(model, roots, a_col, iters=4)
        roots, resid = _refine_near_poles(model, roots, a_col, resid)
        ok = _validate_rows(model, roots, resid, av, k_plus)
        for i in np.nonzero(~ok)[0]:
            starts = _asymptotic_starts(model, av[i], degree)[None, :]
            r2, res2 = _guarded_newton(model, starts, av[i:i + 1, None], iters=30)
            r2, res2 = _refine_near_poles(model, r2, av[i:i + 1, None], res2)
            if not _validate_rows(model, r2, res2, av[i:i + 1], k_plus)[0]:
                raise RootFindingError(
                    f"could not obtain a validated root set for a = {av[i]}: "
                    f"residuals {np.sort(res2[0])[-3:]}, "
                    f"right-half-plane count {(r2[0].real > 0).sum()} (expected {k_plus})")
            roots[i] = r2[0]
        out[lo:lo + _CHUNK] = roots
    return out


def _roots_ladder(model: HyperExpLevyModel, a_matrix):
    """Roots over a ladder of arguments, continuing column to column.

    a_matrix has shape (rows, K) where consecutive columns are close (the
    Euler inversion ladder); column 0 is solved from scratch and later columns
    start Newton from their left neighbor.  Rows failing validation at any
    column are redone through the from-scratch path.
    """
    rows, K = a_matrix.shape
    degree, k_plus = expected_root_counts(model)
    out = np.empty((rows, K, degree), dtype=complex)
    if degree == 0 or rows == 0:
        return out
    out[:, 0] = _roots_many(model, a_matrix[:, 0])
    tol_scale = RESID_RTOL * (1.0 + np.abs(a_matrix))
    for k in range(1, K):
        a_col = a_matrix[:, k][:, None]
        roots, resid = _guarded_newton(model, out[:, k - 1].copy(), a_col, iters=6,
                                       early_tol=tol_scale[:, k][:, None])
        roots, resid = _refine_near_poles(model, roots, a_col, resid)
        ok = _validate_rows(model, roots, resid, a_matrix[:, k], k_plus)
        if not ok.all():
            roots[~ok] = _roots_many(model, a_matrix[~ok, k])
        out[:, k] = roots
    return out


def kappa_roots(model: HyperExpLevyModel, a):
    """All roots of kappa(s) = a (degree n+m+2, n+m+1 or n+m by sigma/mu)."""
    return _roots_many(model, np.array([complex(a)]))[0]


# -- Wiener-Hopf factor -------------------------------------------------------


@dataclass(frozen=True)
class WienerHopfFactor:
    """Positive Wiener-Hopf factor at transform argument a.

    rho are the right-half-plane roots of kappa(s) = a, coeffs the
    partial-fraction coefficients, atom the probability that the supremum at
    an independent exponential time is exactly zero.
    """

    a: complex
    rho: tuple
    coeffs: tuple
    atom: complex          # real-valued (a probability) for real a
    alphas: tuple

    def value(self, s):
        """phi_a_plus(s) via the partial-fraction form (Re s <= 0 natural domain)."""
        s = np.asarray(s, dtype=complex)
        rho = np.asarray(self.rho)
        A = np.asarray(self.coeffs)
        return self.atom + (A * (-rho) / (s[..., None] - rho)).sum(axis=-1)

    def rational_value(self, s):
        """phi_a_plus(s) via the product form prod(1 - s/alpha)/prod(1 - s/rho)."""
        s = np.asarray(s, dtype=complex)
        num = np.ones_like(s)
        for al in self.alphas:
            num = num * (1.0 - s / al)
        den = np.ones_like(s)
        for r in self.rho:
            den = den * (1.0 - s / r)
        return num / den


def _coeffs_from_roots(model, roots, a_flat, check=True):
    """(rho, coeffs, atom) arrays from validated root sets (one row per a)."""
    _, k_plus = expected_root_counts(model)
    n = len(model.pos_terms)
    if k_plus == 0:
        B = len(a_flat)
        return (np.empty((B, 0), complex), np.empty((B, 0), complex),
                np.ones(B, dtype=complex))
    pos_mask = roots.real > 0
    # root counts are validated in _roots_many; reshape by sorting on Re
    order = np.argsort(~pos_mask, axis=1, kind="stable")
    rho = np.take_along_axis(roots, order, axis=1)[:, :k_plus]

    if n:
        num = np.prod(1.0 - rho[:, :, None] / model.alpha[None, None, :], axis=2)
    else:
        num = np.ones_like(rho)
    ratio = 1.0 - rho[:, :, None] / rho[:, None, :]
    idx = np.arange(k_plus)
    ratio[:, idx, idx] = 1.0
    den = np.prod(ratio, axis=2)
    coeffs = num / den

    if k_plus == n:  # no diffusion and no upward drift: supremum has an atom at 0
        atom = np.prod(rho / model.alpha[None, :], axis=1)
    else:
        atom = np.zeros(len(a_flat), dtype=complex)
    if check:
        defect = np.abs(coeffs.sum(axis=1) + atom - 1.0)
        worst = defect.max() if len(defect) else 0.0
        if worst > 1e-8:
            raise RootFindingError(
                f"partial-fraction coefficients violate sum rule by {worst:.3e}")
    return rho, coeffs, atom


def _factor_arrays(model, a_flat, check=True):
    """(rho, coeffs, atom) arrays for a batch of transform arguments."""
    roots = _roots_many(model, a_flat)
    return _coeffs_from_roots(model, roots, a_flat, check=check)


def wh_plus_factor(model: HyperExpLevyModel, a, check=True):
    """Wiener-Hopf positive factor at a (Re(a) > 0 for the transform region)."""
    rho, coeffs, atom = _factor_arrays(model, np.array([complex(a)]), check=check)
    return WienerHopfFactor(a=complex(a), rho=tuple(rho[0]), coeffs=tuple(coeffs[0]),
                            atom=complex(atom[0]), alphas=tuple(model.alpha))


# -- first-passage transforms -------------------------------------------------


def first_passage_transforms(model: HyperExpLevyModel, x, a_flat, check=True):
    """(Fhat, fhat) at each a: transforms of P(T_x < t) and of the density.

    fhat(a) = sum_k A_k exp(-rho_k x) = E[exp(-a T_x)];  Fhat = fhat / a.
    """
    if x <= 0:
        raise ConfigError(f"barrier log-distance must be positive, got {x}")
    rho, coeffs, _ = _factor_arrays(model, a_flat, check=check)
    fhat = (coeffs * np.exp(-rho * x)).sum(axis=1)
    return fhat / a_flat, fhat


def first_passage_transforms_grid(model: HyperExpLevyModel, x, a_matrix, check=True):
    """Density transform fhat over a (rows, K) ladder of arguments.

    Exploits continuation along the ladder axis; equivalent to the flat
    batched route but much cheaper for the day-grid inversion.
    """
    if x <= 0:
        raise ConfigError(f"barrier log-distance must be positive, got {x}")
    rows, K = a_matrix.shape
    roots = _roots_ladder(model, a_matrix)
    flat = roots.reshape(rows * K, roots.shape[-1])
    rho, coeffs, _ = _coeffs_from_roots(model, flat, a_matrix.ravel(), check=check)
    fhat = (coeffs * np.exp(-rho * x)).sum(axis=1)
    return fhat.reshape(rows, K)


def first_passage_transform(model: HyperExpLevyModel, x, a):
    """Scalar (Fhat(a), fhat(a)) for the passage time over level x > 0."""
    Fhat, fhat = first_passage_transforms(model, x, np.array([complex(a)]))
    return complex(Fhat[0]), complex(fhat[0])


def down_crossing_transform(model: HyperExpLevyModel, barrier, a):
    """Transforms for the first drop of exp(X) below `barrier` (fraction of spot).

    Uses first passage of -X over log(1/barrier).
    """
    if not 0.0 < barrier < 1.0:
        raise ConfigError(f"barrier must lie in (0, 1), got {barrier}")
    return first_passage_transform(model.reflect(), log(1.0 / barrier), a)
