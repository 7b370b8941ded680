"""Model assembly: diffusion correction, drift, exponent, reflection."""

import numpy as np
import pytest
from scipy.integrate import quad

from edslevy import (CgmyParams, ConfigError, DiffusionConfig, HyperExpLevyModel,
                     NumericalError, build_model, build_two_sided_density,
                     risk_neutral_drift, small_jump_variance)
from edslevy.levymodel import small_jump_variance_sides

STYLIZED = CgmyParams(c=0.5, g=2.0, m=10.0, y=0.5)


def trapezoid_variance_oracle(params, pos_terms, neg_terms, eps, n=4_000_001):
    """High-resolution trapezoid of x^2 * residual kernel over (-eps, eps)."""
    total = 0.0
    for temper, terms in ((params.m, pos_terms), (params.g, neg_terms)):
        x = np.linspace(0.0, eps, n)
        coefs = np.array([c for c, _ in terms])
        rates = np.array([r for _, r in terms])
        with np.errstate(divide="ignore", invalid="ignore"):
            true = params.c * np.exp(-temper * x) * x ** (1.0 - params.y)
        true[0] = 0.0
        mix = x * x * (coefs[None, :] * np.exp(-np.outer(x, rates))).sum(axis=1)
        total += np.trapezoid(true - mix, x)
    return total


@pytest.fixture(scope="module")
def stylized_terms(preset):
    return build_two_sided_density(preset, STYLIZED)


def test_variance_matches_trapezoid_oracle(stylized_terms):
    pos, neg = stylized_terms
    got = small_jump_variance(STYLIZED, pos, neg, DiffusionConfig(cutoff=0.25))
    oracle = trapezoid_variance_oracle(STYLIZED, pos, neg, 0.25)
    assert got == pytest.approx(oracle, rel=1e-8)


def test_variance_zero_intensity(preset):
    params = CgmyParams(c=0.0, g=2.0, m=10.0, y=0.5)
    pos, neg = build_two_sided_density(preset, params)
    assert small_jump_variance(params, pos, neg) == pytest.approx(0.0, abs=1e-15)


def test_variance_symmetric_tempering(preset):
    params = CgmyParams(c=0.5, g=10.0, m=10.0, y=0.5)
    pos, neg = build_two_sided_density(preset, params)
    side_pos, side_neg = small_jump_variance_sides(params, pos, neg)
    assert side_pos == pytest.approx(side_neg, rel=1e-12)


def test_variance_negative_total_is_error(stylized_terms):
    pos, neg = stylized_terms
    inflated_pos = tuple((10.0 * c, r) for c, r in pos)
    inflated_neg = tuple((10.0 * c, r) for c, r in neg)
    with pytest.raises(NumericalError, match="cutoff"):
        small_jump_variance(STYLIZED, inflated_pos, inflated_neg,
                            DiffusionConfig(cutoff=0.25))


def test_diffusion_config_validation():
    with pytest.raises(ConfigError):
        DiffusionConfig(cutoff=-0.1)


def test_drift_no_randomness():
    assert risk_neutral_drift((), (), 0.0, 0.05) == pytest.approx(0.05, abs=1e-15)


def test_drift_brownian_only():
    assert risk_neutral_drift((), (), 0.02, 0.05) == pytest.approx(0.04, abs=1e-15)


def test_drift_requires_alpha_above_one():
    with pytest.raises(ConfigError):
        risk_neutral_drift(((1.0, 0.8),), (), 0.0, 0.05)


def test_martingale_identity_after_assembly(stylized_model):
    assert abs(stylized_model.kappa(1.0) - 0.05) < 1e-12


def test_kappa_at_zero(stylized_model):
    assert abs(stylized_model.kappa(0.0)) < 1e-13


def test_kappa_real_on_pole_free_interval(stylized_model):
    lo = -min(r for _, r in stylized_model.neg_terms)
    hi = min(r for _, r in stylized_model.pos_terms)
    for s in np.linspace(lo + 0.05, hi - 0.05, 17):
        val = stylized_model.kappa(float(s))
        assert val.imag == pytest.approx(0.0, abs=1e-14)


def test_kappa_vs_extended_precision(stylized_model):
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 40
    m = stylized_model
    s = mpmath.mpf("0.5")
    terms = [mpmath.mpf(m.mu) * s, mpmath.mpf(m.sigma2) / 2 * s * s]
    for c, r in m.pos_terms:
        terms.append(mpmath.mpf(c) * (1 / (mpmath.mpf(r) - s) - 1 / mpmath.mpf(r)))
    for c, r in m.neg_terms:
        terms.append(mpmath.mpf(c) * (1 / (mpmath.mpf(r) + s) - 1 / mpmath.mpf(r)))
    oracle = float(mpmath.fsum(terms))
    assert stylized_model.kappa(0.5).real == pytest.approx(oracle, rel=1e-13)


def test_kappa_matches_jump_integral(stylized_model):
    """kappa - drift - diffusion equals the integral of (e^{sx}-1) k(x) dx."""
    m = stylized_model
    for s in (-0.8, 0.3, 1.5):
        jump_part = m.kappa(s).real - m.mu * s - 0.5 * m.sigma2 * s * s

        def pos_integrand(x):
            # (e^{sx} - 1) k_+(x), exponents grouped to stay overflow-safe
            return sum(c * (np.exp((s - r) * x) - np.exp(-r * x))
                       for c, r in m.pos_terms)

        def neg_integrand(x):
            return sum(c * (np.exp((-s - r) * x) - np.exp(-r * x))
                       for c, r in m.neg_terms)

        val = quad(pos_integrand, 0, np.inf, limit=200)[0] \
            + quad(neg_integrand, 0, np.inf, limit=200)[0]
        assert jump_part == pytest.approx(val, rel=1e-8)


def test_kappa_pole_rejection(stylized_model):
    pole = stylized_model.pos_terms[0][1]
    with pytest.raises(NumericalError, match="pole"):
        stylized_model.kappa(pole)


def test_reflect_is_involution(stylized_model):
    twice = stylized_model.reflect().reflect()
    assert twice.pos_terms == stylized_model.pos_terms
    assert twice.neg_terms == stylized_model.neg_terms
    assert twice.mu == stylized_model.mu
    assert twice.sigma2 == stylized_model.sigma2


def test_reflect_exponent_identity(stylized_model):
    refl = stylized_model.reflect()
    rng = np.random.default_rng(5)
    pts = rng.uniform(-1.5, 1.5, 8) + 1j * rng.uniform(-3, 3, 8)
    for s in pts:
        assert refl.kappa(s) == pytest.approx(stylized_model.kappa(-s), rel=1e-13)
    assert refl.kappa(1.0) == pytest.approx(stylized_model.kappa(-1.0), rel=1e-13)


def test_reflect_swaps_tempering(preset):
    pos, neg = build_two_sided_density(preset, STYLIZED)
    model = HyperExpLevyModel(pos_terms=pos, neg_terms=neg, sigma2=0.0, mu=0.1)
    refl = model.reflect()
    for (_, rate), u in zip(refl.pos_terms, preset.nodes):
        assert rate == pytest.approx(STYLIZED.g + u)
    for (_, rate), u in zip(refl.neg_terms, preset.nodes):
        assert rate == pytest.approx(STYLIZED.m + u)


def test_serialization_round_trip(tmp_path, stylized_model):
    path = tmp_path / "model.json"
    stylized_model.save(path)
    loaded = HyperExpLevyModel.load(path)
    assert loaded.pos_terms == stylized_model.pos_terms
    assert loaded.neg_terms == stylized_model.neg_terms
    assert loaded.sigma2 == stylized_model.sigma2
    assert loaded.mu == stylized_model.mu
    assert loaded.provenance["cgmy"]["m"] == 10.0


def test_from_dict_rejects_unknown_fields(stylized_model):
    doc = stylized_model.to_dict()
    doc["extra"] = 1
    with pytest.raises(ConfigError):
        HyperExpLevyModel.from_dict(doc)


def test_model_validation():
    with pytest.raises(ConfigError):
        HyperExpLevyModel(pos_terms=((1.0, 2.0), (1.0, 2.0)), neg_terms=(),
                          sigma2=0.0, mu=0.0)
    with pytest.raises(ConfigError):
        HyperExpLevyModel(pos_terms=((1.0, -2.0),), neg_terms=(), sigma2=0.0, mu=0.0)
    with pytest.raises(ConfigError):
        HyperExpLevyModel(pos_terms=(), neg_terms=(), sigma2=-1e-3, mu=0.0)


def test_build_model_rate_only_drift(preset):
    model = build_model(STYLIZED, preset, 0.05, 0.0, drift_mode="rate_only")
    assert model.mu == pytest.approx(0.05)
    with pytest.raises(ConfigError):
        build_model(STYLIZED, preset, 0.05, 0.0, drift_mode="martingale-ish")


def test_build_model_without_diffusion(preset):
    model = build_model(STYLIZED, preset, 0.05, 0.0, diffusion=None)
    assert model.sigma2 == 0.0
    assert abs(model.kappa(1.0) - 0.05) < 1e-12
