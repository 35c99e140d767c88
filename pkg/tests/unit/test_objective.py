from __future__ import annotations

import pickle

import numpy as np
import pytest
from prometheus_client import REGISTRY

from musebench.errors import ModelError
from musebench.learn.model import Task
from musebench.search.muse import GridParams, GridSpec, SearchArgs, driver
from musebench.search.objective import DEFAULT_ITERATIONS, PipelineObjective

MM_PCA = GridParams(1, 1, "mm", "pca")
STD_F = GridParams(1, 1, "std", "f")


@pytest.fixture
def small_iris(iris):
    return iris.take(np.arange(0, 150, 3))


@pytest.fixture
def classify_objective(small_iris):
    return PipelineObjective(dataset=small_iris, task=Task.CLASSIFY, dims=2, iterations=5)


def test_defaults(small_iris, linear_regression):
    obj = PipelineObjective(dataset=small_iris, task="classify", dims=2)
    assert obj.task is Task.CLASSIFY
    assert obj.iterations == DEFAULT_ITERATIONS[Task.CLASSIFY]
    assert obj.n_classes == 3
    reg = PipelineObjective(dataset=linear_regression, task=Task.REGRESS, dims=2)
    assert reg.iterations == 10
    assert reg.n_classes is None


def test_validation(small_iris):
    with pytest.raises(ModelError):
        PipelineObjective(dataset=small_iris, task=Task.CLASSIFY, dims=0)
    one_class = small_iris.take(np.arange(10))
    with pytest.raises(ModelError):
        PipelineObjective(dataset=one_class, task=Task.CLASSIFY, dims=2)


def test_prepare_is_cached_per_preprocessing_pair(classify_objective):
    first = classify_objective.prepare(MM_PCA)
    assert classify_objective.prepare(GridParams(2, 3, "mm", "pca")) is first
    assert classify_objective.prepare(STD_F) is not first
    assert first.X_train.shape == (40, 2)
    assert first.X_test.shape == (10, 2)
    assert first.X_train.min() >= 0.0 and first.X_train.max() <= 1.0


def test_build_model_tiles_point(classify_objective):
    model = classify_objective.build_model(np.array([0.1, 0.2]), GridParams(1, 2, "mm", "pca"))
    assert model.weights.size == 6
    np.testing.assert_allclose(model.weights, [0.1, 0.2] * 3)
    assert model.n_classes == 3
    assert model.fm.reps == 1 and model.an.reps == 2


def test_run_scores_accuracy_deterministically(classify_objective):
    point = np.array([0.3, 0.7])
    score, returned = classify_objective.run(point, MM_PCA)
    assert 0.0 <= score <= 1.0
    assert returned is point
    assert classify_objective.run(point, MM_PCA)[0] == score


def test_pickling_drops_cache(classify_objective):
    point = np.array([0.3, 0.7])
    score, _ = classify_objective.run(point, MM_PCA)
    clone = pickle.loads(pickle.dumps(classify_objective))
    assert clone._cache == {}
    assert clone.run(point, MM_PCA)[0] == score


def test_regression_scores_r2(linear_regression):
    obj = PipelineObjective(
        dataset=linear_regression.take(np.arange(60)), task=Task.REGRESS, dims=2, iterations=3
    )
    score, _ = obj.run(np.array([0.5, 0.5]), GridParams(1, 1, "mm", "f"))
    assert np.isfinite(score)
    assert score <= 1.0


def test_driver_over_pipeline(classify_objective):
    grid = GridSpec(feat_ans=((1, 1),), sca_red=(("mm", "pca"), ("std", "f")), n_trials=1)
    template = SearchArgs.unit_box(2, epsilon=0.05, alpha=0.9, beta=0.5, depth=1)
    out = driver(grid, template, classify_objective, seed=0)
    assert len(out.combinations) == 2
    assert 0.0 <= out.best_sc <= 1.0
    assert all(c.n_evaluations <= 3 for c in out.combinations)


@pytest.mark.parametrize("workers", [1, 2])
def test_training_durations_reach_the_parent_registry(classify_objective, workers):
    sample = ("musebench_training_duration_seconds_count", {"task": "classify"})
    before = REGISTRY.get_sample_value(*sample) or 0.0
    grid = GridSpec(feat_ans=((1, 1),), sca_red=(("mm", "pca"), ("std", "pca")), n_trials=1)
    template = SearchArgs.unit_box(2, epsilon=0.05, alpha=0.9, beta=0.5, depth=0)
    driver(grid, template, classify_objective, seed=0, workers=workers)
    # one seed evaluation, hence one training, per combination
    assert REGISTRY.get_sample_value(*sample) == before + 2
