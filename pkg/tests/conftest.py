from __future__ import annotations

import numpy as np
import pytest

from musebench.data.loader import load_iris, make_linear_regression
from musebench.data.preprocess import RawDataset
from musebench.search.muse import FunctionObjective, SearchArgs


class PinnedRng:
    """Stands in for a numpy Generator in the search: every ``uniform`` draw
    returns the low end of its range."""

    def __init__(self) -> None:
        self.calls = 0

    def uniform(self, low=0.0, high=1.0, size=None):
        self.calls += 1
        shape = np.broadcast_shapes(np.shape(low), np.shape(high))
        if size is None and shape == ():
            return float(low)
        return np.broadcast_to(np.asarray(low, dtype=np.float64), size or shape).copy()


def peak_score(p) -> float:
    """1 - mean |p - 0.9|; best at 0.9 in every coordinate."""
    return float(1.0 - np.mean(np.abs(np.asarray(p, dtype=np.float64) - 0.9)))


@pytest.fixture
def pinned_rng() -> PinnedRng:
    return PinnedRng()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def iris() -> RawDataset:
    return load_iris()


@pytest.fixture
def linear_regression() -> RawDataset:
    return make_linear_regression(200, 2, noise=0.1, seed=7)


@pytest.fixture
def unit_args() -> SearchArgs:
    return SearchArgs.unit_box(1, epsilon=0.02, alpha=0.9, beta=0.5, depth=3)


@pytest.fixture
def peak_objective() -> FunctionObjective:
    return FunctionObjective(peak_score)
