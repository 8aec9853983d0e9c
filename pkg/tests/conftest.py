import numpy as np
import pytest

from btlbounds.models.models import ComparisonBudget, PriorHyperParams


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240531)


@pytest.fixture
def prior_k4() -> PriorHyperParams:
    return PriorHyperParams.ak_minus_one(4, 5.0)


@pytest.fixture
def prior_k10() -> PriorHyperParams:
    """a = 5, b = 49: the setting of the bound-vs-EM and topology runs."""
    return PriorHyperParams.ak_minus_one(10, 5.0)


@pytest.fixture
def random_budget():
    """Factory for random symmetric budgets; each pair present with probability density."""

    def make(rng: np.random.Generator, k: int, max_count: int = 20, density: float = 0.7) -> ComparisonBudget:
        iu = np.triu_indices(k, 1)
        counts = rng.integers(1, max_count + 1, size=iu[0].size)
        counts[rng.random(iu[0].size) >= density] = 0
        n = np.zeros((k, k), dtype=np.int64)
        n[iu] = counts
        n.T[iu] = counts
        return ComparisonBudget(n)

    return make
