from __future__ import annotations

import math

import numpy as np
import pytest

from musebench.data.preprocess import (
    PreprocessSpec,
    RawDataset,
    Reducer,
    Scaler,
    anova_f_scores,
    encode_labels,
    fit_apply_minmax,
    fit_apply_pca,
    fit_apply_standard,
    fit_pca,
    fit_transform,
    select_top_k,
    split_train_test,
)
from musebench.errors import PreprocessError, UndefinedFError


class TestRawDataset:
    def test_shape_checks(self):
        with pytest.raises(PreprocessError):
            RawDataset(X=np.zeros((3, 2)), y=np.zeros(2), feature_names=("a", "b"))
        with pytest.raises(PreprocessError):
            RawDataset(X=np.zeros((3, 2)), y=np.zeros(3), feature_names=("a",))
        with pytest.raises(PreprocessError):
            RawDataset(X=np.zeros(3), y=np.zeros(3), feature_names=("a",))

    def test_take_keeps_names(self, iris):
        part = iris.take([0, 50, 100])
        assert part.n_samples == 3
        assert part.class_names == iris.class_names
        np.testing.assert_array_equal(part.y, [0, 1, 2])


def test_encode_labels_orders():
    codes, names = encode_labels(["b", "a", "b", "c"])
    np.testing.assert_array_equal(codes, [0, 1, 0, 2])
    assert names == ("b", "a", "c")
    codes, names = encode_labels([3, 1, 3])
    np.testing.assert_array_equal(codes, [1, 0, 1])
    assert names == ("1", "3")


class TestSplit:
    def test_counts_and_partition(self, iris):
        train, test = split_train_test(iris, 0.8, seed=0)
        assert (train.n_samples, test.n_samples) == (120, 30)
        rows = {tuple(r) for r in np.vstack([train.X, test.X]).round(6)}
        assert rows == {tuple(r) for r in iris.X.round(6)}

    def test_stratified_for_class_targets(self, iris):
        train, _ = split_train_test(iris, 0.8, seed=3)
        np.testing.assert_array_equal(np.bincount(train.y), [40, 40, 40])

    def test_same_seed_same_split(self, iris):
        a, _ = split_train_test(iris, 0.8, seed=11)
        b, _ = split_train_test(iris, 0.8, seed=11)
        c, _ = split_train_test(iris, 0.8, seed=12)
        np.testing.assert_array_equal(a.X, b.X)
        assert not np.array_equal(a.X, c.X)

    def test_rejects_degenerate_fractions(self, iris):
        for fraction in (0.0, 1.0, 1.5):
            with pytest.raises(PreprocessError):
                split_train_test(iris, fraction, seed=0)
        tiny = iris.take([0, 1])
        with pytest.raises(PreprocessError):
            split_train_test(tiny, 0.1, seed=0)

    def test_unstratifiable_falls_back(self):
        ds = RawDataset(
            X=np.arange(10.0).reshape(5, 2),
            y=np.array([0, 0, 0, 0, 1]),
            feature_names=("a", "b"),
            class_names=("x", "y"),
        )
        train, test = split_train_test(ds, 0.6, seed=0)
        assert (train.n_samples, test.n_samples) == (3, 2)


class TestScalers:
    def test_minmax_example(self):
        train, other = fit_apply_minmax(np.array([[1.0], [3.0]]), np.array([[2.0], [5.0]]))
        np.testing.assert_allclose(train.ravel(), [0.0, 1.0])
        np.testing.assert_allclose(other.ravel(), [0.5, 1.0])

    def test_minmax_constant_column_maps_to_zero(self):
        train, _ = fit_apply_minmax(np.array([[2.0, 1.0], [2.0, 3.0]]), np.zeros((1, 2)))
        np.testing.assert_allclose(train[:, 0], [0.0, 0.0])

    def test_standard_example(self):
        train, other = fit_apply_standard(np.array([[1.0], [3.0]]), np.array([[5.0]]))
        np.testing.assert_allclose(train.ravel(), [-1.0, 1.0])
        np.testing.assert_allclose(other.ravel(), [3.0])

    def test_standard_zero_spread_gives_zero(self):
        train, _ = fit_apply_standard(np.array([[4.0], [4.0], [4.0]]), np.zeros((1, 1)))
        np.testing.assert_allclose(train.ravel(), 0.0)

    def test_standard_needs_two_rows(self):
        with pytest.raises(PreprocessError):
            fit_apply_standard(np.array([[1.0]]), np.array([[1.0]]))

    def test_standard_train_columns_are_centred(self, rng):
        train, _ = fit_apply_standard(rng.uniform(0.0, 10.0, (25, 4)), np.zeros((1, 4)))
        np.testing.assert_allclose(train.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(train.std(axis=0), 1.0, atol=1e-12)

    def test_statistics_come_from_train_only(self, rng):
        train = rng.normal(size=(20, 3))
        other = rng.normal(size=(5, 3))
        a, _ = fit_apply_minmax(train, other)
        b, _ = fit_apply_minmax(train, other * 100.0)
        np.testing.assert_array_equal(a, b)


class TestPCA:
    def test_collinear_points(self):
        train, _ = fit_apply_pca(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]), np.zeros((1, 2)), 1)
        np.testing.assert_allclose(train.ravel(), [-math.sqrt(2), 0.0, math.sqrt(2)], atol=1e-12)

    def test_sign_convention(self, rng):
        fit = fit_pca(rng.normal(size=(30, 4)), 3)
        pivots = np.argmax(np.abs(fit.components), axis=1)
        assert np.all(fit.components[np.arange(3), pivots] > 0)

    def test_components_are_orthonormal_and_ordered(self, rng):
        fit = fit_pca(rng.normal(size=(40, 4)) * [3.0, 1.0, 0.5, 0.1], 4)
        np.testing.assert_allclose(fit.components @ fit.components.T, np.eye(4), atol=1e-10)
        assert np.all(np.diff(fit.explained_variance) <= 0)

    def test_train_projection_is_centred(self, rng):
        train, _ = fit_apply_pca(rng.normal(3.0, 2.0, (30, 4)), np.zeros((1, 4)), 2)
        np.testing.assert_allclose(train.mean(axis=0), 0.0, atol=1e-12)

    def test_full_rank_projection_unprojects_to_centred_data(self, rng):
        X = rng.normal(size=(20, 3)) * [2.0, 1.0, 0.3] + [5.0, -1.0, 0.0]
        fit = fit_pca(X, 3)
        np.testing.assert_allclose(fit.unproject(fit.project(X)), X - X.mean(axis=0), atol=1e-10)

    def test_k_out_of_range(self):
        with pytest.raises(PreprocessError):
            fit_pca(np.zeros((5, 2)), 3)


class TestFeatureSelection:
    def test_anova_example(self):
        X = np.array([[1.0, 5.0, 1.0], [2.0, 5.0, 1.0], [3.0, 5.0, 2.0], [4.0, 5.0, 2.0]])
        scores = anova_f_scores(X, [0, 0, 1, 1])
        assert scores[0] == pytest.approx(8.0)
        assert scores[1] == 0.0
        assert scores[2] == math.inf

    def test_single_class_is_undefined(self):
        with pytest.raises(UndefinedFError):
            anova_f_scores(np.ones((3, 2)), [1, 1, 1])

    def test_top_k_ties_go_to_lower_index(self):
        np.testing.assert_array_equal(select_top_k([1.0, 3.0, 3.0, 0.0], 2), [1, 2])
        with pytest.raises(PreprocessError):
            select_top_k([1.0], 2)


class TestFitTransform:
    @pytest.mark.parametrize("scaler", list(Scaler))
    @pytest.mark.parametrize("reducer", [Reducer.PCA, Reducer.ANOVA_F])
    def test_train_output_spans_unit_box(self, iris, scaler, reducer):
        fitted = fit_transform(PreprocessSpec(scaler, reducer, 2), iris.X, iris.y)
        out = fitted.apply(iris.X)
        assert out.shape == (150, 2)
        np.testing.assert_allclose(out.min(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.max(axis=0), 1.0, atol=1e-12)

    def test_test_rows_are_clipped(self, iris):
        train, test = split_train_test(iris, 0.8, seed=0)
        fitted = fit_transform(PreprocessSpec("std", "pca", 2), train.X, train.y)
        out = fitted.apply(np.vstack([test.X, test.X * 10.0]))
        assert out.min() >= 0.0
        assert out.max() <= 1.0

    def test_selection_keeps_petal_features_for_iris(self, iris):
        fitted = fit_transform(PreprocessSpec("mm", "f", 2), iris.X, iris.y)
        np.testing.assert_array_equal(fitted.kept_features, [2, 3])

    def test_continuous_target_uses_regression_f(self, linear_regression):
        X = np.column_stack([linear_regression.X, np.zeros(linear_regression.n_samples)])
        fitted = fit_transform(
            PreprocessSpec("none", "f", 1), X, linear_regression.y, continuous_target=True
        )
        np.testing.assert_array_equal(fitted.kept_features, [0])

    def test_without_unit_box(self, iris):
        fitted = fit_transform(PreprocessSpec("std", "none", 4), iris.X, unit_box=False)
        assert not fitted.unit_box
        np.testing.assert_allclose(fitted.apply(iris.X).mean(axis=0), 0.0, atol=1e-12)

    def test_dimension_errors(self, iris):
        with pytest.raises(PreprocessError):
            fit_transform(PreprocessSpec("mm", "pca", 5), iris.X)
        with pytest.raises(PreprocessError):
            fit_transform(PreprocessSpec("mm", "none", 2), iris.X)
        with pytest.raises(UndefinedFError):
            fit_transform(PreprocessSpec("mm", "f", 2), iris.X)

    def test_labels(self):
        assert PreprocessSpec("mm", "f", 2).label == "mm+f"
        assert PreprocessSpec("none", "pca", 2).label == "pca"
        assert PreprocessSpec("none", "none", 2).label == "identity"
