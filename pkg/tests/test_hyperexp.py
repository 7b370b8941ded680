"""Mixture fit: weights, objective, two-sided coefficients."""

import math

import numpy as np
import pytest

from edslevy import ConfigError, FitError, CgmyParams, build_two_sided_density
from edslevy.hyperexp import (PRESET_NODES, PRESET_STARTS, fit_exponential_mixture,
                              fit_objective, make_grid, mixture_weights, preset_fit)

GRID = make_grid()


def direct_objective(nodes, y, grid, terminal_spacing=None):
    """Independent high-precision evaluation of the sum of squared errors."""
    nodes = list(nodes)
    if terminal_spacing is None:
        terminal_spacing = 0.6 * nodes[-1]
    spacings = [b - a for a, b in zip(nodes, nodes[1:])] + [terminal_spacing]
    total = []
    for x in grid:
        mix = math.fsum(u ** y * d * math.exp(-u * x) / math.gamma(1 + y)
                        for u, d in zip(nodes, spacings))
        total.append((x ** (-1 - y) - mix) ** 2)
    return math.fsum(total)


def test_grid_matches_documented_points():
    assert len(GRID) == 191
    assert GRID[0] == 0.25
    assert GRID[-1] == pytest.approx(5.0, abs=1e-12)
    assert np.allclose(np.diff(GRID), 0.025)


def test_residual_norm_matches_direct_evaluation(preset):
    oracle = direct_objective(preset.nodes, 0.5, GRID)
    assert preset.residual_norm == pytest.approx(oracle, rel=1e-12)


def test_objective_at_preset_nodes_vs_oracle():
    val = fit_objective(PRESET_NODES, 0.5, GRID)
    assert val == pytest.approx(direct_objective(PRESET_NODES, 0.5, GRID), rel=1e-12)


def test_weights_positive_and_mixture_monotone(preset):
    w = np.asarray(preset.weights)
    assert np.all(w > 0)
    x = np.linspace(0.25, 5.0, 200)
    vals = preset.value(x)
    assert np.all(np.diff(vals) < 0)  # mixture of decaying exponentials


def test_preset_relative_error_regression_guard(preset):
    # measured quality of the shipped node list on its grid; guards regressions
    assert preset.max_relative_error() == pytest.approx(0.42515, abs=5e-4)


def test_fit_from_converged_point_is_fixed(preset_converged):
    nodes, value = preset_converged
    refit = fit_exponential_mixture(0.5, nodes, GRID)
    assert refit.residual_norm <= value + 1e-10
    assert np.allclose(refit.nodes, nodes, rtol=1e-3, atol=1e-4)


@pytest.fixture(scope="module")
def preset_converged():
    fit = fit_exponential_mixture(0.5, PRESET_STARTS, GRID)
    return np.asarray(fit.nodes), fit.residual_norm


def test_fit_improves_from_starting_values(preset_converged):
    _, value = preset_converged
    assert value < fit_objective(np.sort(np.asarray(PRESET_STARTS)), 0.5, GRID)


def test_fit_rejects_bad_inputs():
    with pytest.raises(ConfigError):
        fit_exponential_mixture(1.5, PRESET_STARTS, GRID)
    with pytest.raises(ConfigError):
        fit_exponential_mixture(0.5, [2.0, 1.0], GRID)
    with pytest.raises(ConfigError):
        fit_exponential_mixture(0.5, [1.0], GRID)
    with pytest.raises(ConfigError):
        fit_exponential_mixture(0.5, PRESET_STARTS, [-1.0, 2.0])


def test_fit_budget_exhaustion_carries_best():
    with pytest.raises(FitError) as info:
        fit_exponential_mixture(0.5, PRESET_STARTS, GRID, max_iter=10)
    assert info.value.best_nodes is not None
    assert info.value.best_objective is not None


def test_terminal_spacing_override():
    w_default = mixture_weights(PRESET_NODES, 0.5)
    w_custom = mixture_weights(PRESET_NODES, 0.5, terminal_spacing=1.0)
    assert np.allclose(w_default[:-1], w_custom[:-1])
    assert w_custom[-1] != w_default[-1]
    with pytest.raises(ConfigError):
        mixture_weights(PRESET_NODES, 0.5, terminal_spacing=-1.0)


def test_two_sided_density_matches_shifted_rates(preset):
    params = CgmyParams(c=1.0, g=2.0, m=10.0, y=0.5)
    pos, neg = build_two_sided_density(preset, params)
    assert pos[0][1] == pytest.approx(10.1940)
    assert neg[0][1] == pytest.approx(2.1940)
    assert len(pos) == len(neg) == len(preset.nodes)
    for (ci, _), (di, _), wi in zip(pos, neg, preset.weights):
        assert ci == pytest.approx(di)
        assert ci == pytest.approx(params.c * wi)


def test_two_sided_density_zero_intensity(preset):
    params = CgmyParams(c=0.0, g=2.0, m=10.0, y=0.5)
    pos, neg = build_two_sided_density(preset, params)
    assert all(c == 0 for c, _ in pos + neg)


def test_two_sided_density_scales_linearly_in_c(preset):
    p1 = CgmyParams(c=0.5, g=2.0, m=10.0, y=0.5)
    p2 = CgmyParams(c=1.5, g=2.0, m=10.0, y=0.5)
    pos1, _ = build_two_sided_density(preset, p1)
    pos2, _ = build_two_sided_density(preset, p2)
    for (c1, a1), (c2, a2) in zip(pos1, pos2):
        assert c2 == pytest.approx(3.0 * c1)
        assert a1 == a2


def test_positive_kernel_value_term_by_term(preset):
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 50
    params = CgmyParams(c=0.5, g=2.0, m=10.0, y=0.5)
    pos, _ = build_two_sided_density(preset, params)
    x = 1.0
    oracle = float(mpmath.fsum(mpmath.mpf(c) * mpmath.exp(-mpmath.mpf(r) * x)
                               for c, r in pos))
    direct = float(sum(c * np.exp(-r * x) for c, r in pos))
    assert direct == pytest.approx(oracle, rel=1e-14)


def test_mismatched_exponent_rejected(preset):
    params = CgmyParams(c=0.5, g=2.0, m=10.0, y=0.4)
    with pytest.raises(ConfigError):
        build_two_sided_density(preset, params)


def test_params_validation():
    with pytest.raises(ConfigError):
        CgmyParams(c=-1.0, g=2.0, m=10.0, y=0.5)
    with pytest.raises(ConfigError):
        CgmyParams(c=0.5, g=0.0, m=10.0, y=0.5)
    with pytest.raises(ConfigError):
        CgmyParams(c=0.5, g=2.0, m=10.0, y=1.2)
    with pytest.raises(ConfigError):
        CgmyParams(c=0.5, g=2.0, m=0.9, y=0.5).require_equity_pricing()
