import numpy as np
import pytest

from edslevy import CgmyParams, DiffusionConfig, HyperExpLevyModel, build_model, preset_fit


@pytest.fixture(scope="session")
def preset():
    return preset_fit()


@pytest.fixture(scope="session")
def stylized_params():
    return CgmyParams(c=0.5, g=2.0, m=10.0, y=0.5)


@pytest.fixture(scope="session")
def stylized_model(preset, stylized_params):
    """Risk-neutral assembly of the running example model (flat 5%)."""
    return build_model(stylized_params, preset, 0.05, 0.0,
                       diffusion=DiffusionConfig(cutoff=0.25))


def brownian_model(sigma2, mu):
    return HyperExpLevyModel(pos_terms=(), neg_terms=(), sigma2=sigma2, mu=mu)


def random_model(rng, n=None, m=None, sigma2=None):
    """A random valid jump-diffusion model with distinct rates."""
    n = int(rng.integers(1, 5)) if n is None else n
    m = int(rng.integers(1, 5)) if m is None else m
    alpha = np.sort(rng.uniform(0.5, 15.0, n)) * (1.0 + 1e-3 * np.arange(n))
    beta = np.sort(rng.uniform(0.5, 15.0, m)) * (1.0 + 1e-3 * np.arange(m))
    a = rng.uniform(0.05, 2.0, n)
    b = rng.uniform(0.05, 2.0, m)
    if sigma2 is None:
        sigma2 = float(rng.uniform(0.001, 0.2))
    mu = float(rng.uniform(-0.5, 0.5))
    return HyperExpLevyModel(pos_terms=tuple(zip(a, alpha)),
                             neg_terms=tuple(zip(b, beta)),
                             sigma2=sigma2, mu=mu)
