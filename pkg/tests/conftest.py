import numpy as np
import pytest

from ionsel import RamanParams


def make_params(eta1=0.1, eta2=0.002, g1=1e6, g2=1e6, delta=1e8, nu=2 * np.pi * 5e6):
    return RamanParams(g1=g1, g2=g2, delta=delta, eta1=eta1, eta2=eta2, nu=nu)


def params_with_selectivity(s, eta1=0.1, g1=1e6, g2=1e6, delta=1e8):
    """g1 = g2 parameter set whose selectivity is exactly s."""
    return make_params(eta1=eta1, eta2=4.0 * eta1 ** 2 / s * (g1 / g2), g1=g1, g2=g2, delta=delta)


def random_params(rng):
    return RamanParams(
        g1=10 ** rng.uniform(5.0, 7.0),
        g2=10 ** rng.uniform(5.0, 7.0),
        delta=10 ** rng.uniform(7.5, 9.0),
        eta1=rng.uniform(0.02, 0.29),
        eta2=rng.uniform(0.002, 0.29),
        nu=2 * np.pi * 10 ** rng.uniform(6.0, 7.0),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def params_s20():
    # selectivity 20: eta2 = 4 * 0.1^2 / 20
    return make_params(eta1=0.1, eta2=0.002)
