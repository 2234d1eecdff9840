"""
Shared fixtures: reference parameter sets and a seeded generator of valid
random problem instances
"""

import numpy as np
import pytest

from model_core import ModelParams, DiffusionSpec


def make_params(d=1, omega0=1.0, gamma=1.0, Dqq=0.0, Dpq=0.0, Dpp=1.0, **conventions):
    return ModelParams(d=d, omega0=omega0, gamma=gamma,
                       diffusion=DiffusionSpec(Dqq, Dpq, Dpp), **conventions)


def random_params(rng, d=1, omega0=None, equal_q=False):
    """
    Valid parameters with |Q| bounded away from zero and a moderate Hessian
    """
    while True:
        w0 = rng.uniform(0.3, 3.0) if omega0 is None else omega0
        g = rng.uniform(0.2, 4.0)
        Dqq = rng.uniform(0.0, 2.0)
        Dpp = rng.uniform(0.1, 3.0)
        if equal_q:
            Dpq = -g * Dqq
            Dpp = max(Dpp, Dpq ** 2 / Dqq if Dqq > 0 else 0.0) + rng.uniform(0.05, 1.0)
        else:
            bound = np.sqrt(Dqq * Dpp)
            Dpq = rng.uniform(-0.9, 0.9) * bound
        params = make_params(d=d, omega0=w0, gamma=g, Dqq=Dqq, Dpq=Dpq, Dpp=Dpp)

        q11 = Dpp + w0 ** 2 * Dqq
        q12 = 2 * w0 * g * Dqq
        q22 = q11 + 4 * g * (Dpq + g * Dqq)
        q = q11 * q22 - q12 ** 2
        scale = max(q11 * w0 ** 2, abs(q22), abs(q12 * w0))
        if abs(q) > 0.05 * scale ** 2 and g * scale / abs(q) < 1e3:
            return params


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def reference_params():
    """Running example: gamma = omega0 = 1, Dqq = 1, Dpq = -1, Dpp = 2"""
    return make_params(Dqq=1.0, Dpq=-1.0, Dpp=2.0)


@pytest.fixture
def classical_params():
    """Classical limit with Dpp = gamma = omega0 = 1 (steady state is N(0, I))"""
    return make_params(Dqq=0.0, Dpq=0.0, Dpp=1.0)
