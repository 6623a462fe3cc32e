import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ttcheb.function_train import Basis, FunctionTrain
from ttcheb.tensor_train import TensorTrain

settings.register_profile(
    "default", max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_tt(rng, dims, rank, scale=1.0):
    """Random complex train with interior ranks ``rank``."""
    d = len(dims)
    ranks = [1] + [rank] * (d - 1) + [1]
    cores = []
    for k, n in enumerate(dims):
        shape = (ranks[k], n, ranks[k + 1])
        cores.append(scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)))
    return TensorTrain(cores)


def random_ft(rng, d, p, rank, domain=(-1.0, 1.0)):
    bases = [Basis(domain[0], domain[1], p)] * d
    return FunctionTrain(bases, random_tt(rng, [p] * d, rank, scale=0.5))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
