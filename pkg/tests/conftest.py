import numpy as np
import pytest

from amimpute.population import generate_synthetic


@pytest.fixture(scope="session")
def pop1_small():
    """Population 1 (linear response surface), small enough for fast tests."""
    return generate_synthetic(1, size=2000, noise_sd=0.1, seed=101)


@pytest.fixture(scope="session")
def pop1_full():
    """Population 1 at the reference size used by stratification tests."""
    return generate_synthetic(1, size=10_000, noise_sd=0.1, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
