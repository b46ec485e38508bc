import numpy as np
import pytest

from fieldcalc.series import BaseSpace


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_base(rng, m):
    return BaseSpace(rng.uniform(0.5, 1.5, m))


def random_spd(rng, m, floor=0.5):
    A = rng.normal(size=(m, m))
    return A @ A.T / m + floor * np.eye(m)


def random_correlation(rng, m):
    """SPD metric with unit diagonal, so the coupling sets the interaction scale."""
    g = random_spd(rng, m)
    d = 1 / np.sqrt(np.diag(g))
    return d[:, None] * g * d[None, :]
