import numpy as np
import pytest

from robust_mspca import SecondMomentSet, rescale_by_max_opnorm


def random_symmetric(rng, d, scale=1.0):
    a = rng.normal(size=(d, d)) * scale
    return 0.5 * (a + a.T)


def random_psd(rng, d, ridge=0.5):
    a = rng.normal(size=(d, d))
    return a @ a.T / d + ridge * np.eye(d)


def wishart_instance(rng, d, L, rescaled=True):
    """PSD sources A A^T/d + I/2, optionally normalized to rho_max = 1."""
    m = SecondMomentSet.from_matrices([random_psd(rng, d) for _ in range(L)])
    if rescaled:
        m, _ = rescale_by_max_opnorm(m)
    return m


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
