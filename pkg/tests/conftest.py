import numpy as np
import pytest
from hypothesis import settings

from clgen.degree_model import WeightSequence

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def random_weights(rng, n, kind=None):
    """Random non-increasing weights of a few shapes."""
    kind = kind or rng.choice(["uniform", "powerlaw", "ints", "hub", "zeros"])
    if kind == "uniform":
        w = rng.uniform(0.1, 20.0, n)
    elif kind == "powerlaw":
        w = (1.0 - rng.random(n)) ** (-1.0 / 1.5)
    elif kind == "ints":
        w = rng.integers(1, 6, n).astype(float)
    elif kind == "hub":
        w = rng.uniform(0.5, 2.0, n)
        w[0] = rng.uniform(1.0, 3.0) * n
    else:
        w = rng.uniform(0.5, 5.0, n)
        w[rng.random(n) < 0.3] = 0.0
        if not w.any():
            w[0] = 1.0
    return WeightSequence.from_sorted(-np.sort(-w))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def toy():
    return WeightSequence.from_sorted([4.0, 3.0, 2.0, 1.0])


@pytest.fixture
def flat4():
    return WeightSequence.from_sorted([2.0, 2.0, 2.0, 2.0])
