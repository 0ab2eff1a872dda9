"""Shared fixtures: small synthetic datasets and fast sampler budgets."""

import numpy as np
import pytest

from outsel import Dataset, SamplerConfig, stack_long


def make_dataset(n=12, K=3, seed=0, missing=()):
    """Small random dataset; ``missing`` lists (individual, outcome) holes."""
    rng = np.random.default_rng(seed)
    outcomes = rng.normal(size=(n, K))
    for i, k in missing:
        outcomes[i, k] = np.nan
    return Dataset(
        outcomes=outcomes,
        exposure=rng.normal(size=n),
        confounder=rng.normal(size=n),
        outcome_names=tuple(f"y{k + 1}" for k in range(K)),
    )


def make_design(n=12, K=3, seed=0, missing=()):
    return stack_long(make_dataset(n=n, K=K, seed=seed, missing=missing))


def quick_config(**overrides):
    """A sampler budget small enough for unit tests."""
    base = dict(n_chains=2, n_burnin=200, n_samples=200, thinning=2, seed=0)
    base.update(overrides)
    return SamplerConfig(**base)


@pytest.fixture
def dataset():
    return make_dataset()


@pytest.fixture
def design():
    return make_design()
