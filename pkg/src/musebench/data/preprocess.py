"""Classical preprocessing: split, scale, reduce, and map into the unit box.

Every statistic is fitted on training rows only. A :class:`FittedTransform`
holds those statistics and applies them with plain array arithmetic, so applying
it to its own training data reproduces the fit-time output exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from enum import StrEnum

import numpy as np
import numpy.typing as npt
import structlog
from sklearn.decomposition import PCA
from sklearn.feature_selection import f_classif, f_regression
from sklearn.model_selection import train_test_split
from sklearn.preprocessing import MinMaxScaler, StandardScaler

from musebench.errors import PreprocessError, UndefinedFError

logger = structlog.get_logger()

Matrix = npt.NDArray[np.float64]


class Scaler(StrEnum):
    STANDARD = "std"
    MINMAX = "mm"
    NONE = "none"


class Reducer(StrEnum):
    PCA = "pca"
    ANOVA_F = "f"
    NONE = "none"


@dataclass(frozen=True)
class RawDataset:
    X: Matrix = field(repr=False)
    y: npt.NDArray = field(repr=False)
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] < 1:
            raise PreprocessError(f"X must be a samples x features matrix, got shape {X.shape}")
        y = np.asarray(self.y)
        if y.shape != (X.shape[0],):
            raise PreprocessError(f"{X.shape[0]} rows of X but y has shape {y.shape}")
        if len(self.feature_names) != X.shape[1]:
            raise PreprocessError(
                f"{X.shape[1]} feature columns but {len(self.feature_names)} names"
            )
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def take(self, rows: npt.ArrayLike) -> RawDataset:
        idx = np.asarray(rows, dtype=np.intp)
        return replace(self, X=self.X[idx], y=self.y[idx])


def encode_labels(y: npt.ArrayLike) -> tuple[npt.NDArray[np.int64], tuple[str, ...]]:
    """Class codes 0..k-1. Numeric labels follow their sorted distinct values;
    anything else follows first appearance."""
    arr = np.asarray(y)
    if np.issubdtype(arr.dtype, np.number):
        values, codes = np.unique(arr, return_inverse=True)
        return codes.astype(np.int64), tuple(str(v) for v in values)
    order: dict[str, int] = {}
    codes = np.array([order.setdefault(str(v), len(order)) for v in arr], dtype=np.int64)
    return codes, tuple(order)


# ── Split ─────────────────────────────────────────────────────────────


def split_train_test(
    ds: RawDataset, fraction: float, seed: int, *, stratify: bool | None = None
) -> tuple[RawDataset, RawDataset]:
    """Shuffled split with ``round(fraction * n)`` training rows.

    Stratifies by class when the target is a classification target (or when
    ``stratify`` is forced); falls back to a plain split when some class is too
    small to be spread over both parts.
    """
    if not 0.0 < fraction < 1.0:
        raise PreprocessError(f"train fraction must be in (0, 1), got {fraction}")
    n = ds.n_samples
    if n < 2:
        raise PreprocessError(f"need at least 2 samples to split, got {n}")
    n_train = int(round(fraction * n))
    if not 1 <= n_train <= n - 1:
        raise PreprocessError(f"fraction {fraction} leaves an empty part for {n} samples")

    if stratify is None:
        stratify = ds.class_names is not None
    indices = np.arange(n)
    labels = encode_labels(ds.y)[0] if stratify else None
    try:
        train_idx, test_idx = train_test_split(
            indices, train_size=n_train, random_state=seed, shuffle=True, stratify=labels
        )
    except ValueError:
        if labels is None:
            raise
        logger.warning("stratified_split_unavailable", n_samples=n, n_train=n_train)
        train_idx, test_idx = train_test_split(
            indices, train_size=n_train, random_state=seed, shuffle=True
        )
    return ds.take(train_idx), ds.take(test_idx)


# ── Scalers ───────────────────────────────────────────────────────────


def fit_apply_minmax(train: Matrix, other: Matrix) -> tuple[Matrix, Matrix]:
    """Affine map of each train column onto [0, 1]; ``other`` uses the train range
    and is clipped. Constant columns map to 0."""
    scaler = MinMaxScaler(feature_range=(0.0, 1.0), clip=True).fit(train)
    return scaler.transform(train), scaler.transform(other)


def fit_apply_standard(train: Matrix, other: Matrix) -> tuple[Matrix, Matrix]:
    """``(x - mean) / std`` with population statistics; zero std gives 0."""
    if np.asarray(train).shape[0] < 2:
        raise PreprocessError("standard scaling needs at least 2 training rows")
    scaler = StandardScaler().fit(train)
    return scaler.transform(train), scaler.transform(other)


# ── Reducers ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class PCAFit:
    mean: Matrix
    components: Matrix
    explained_variance: Matrix

    def project(self, X: Matrix) -> Matrix:
        return (np.asarray(X, dtype=np.float64) - self.mean) @ self.components.T

    def unproject(self, Z: Matrix) -> Matrix:
        """Back to centred feature space."""
        return np.asarray(Z, dtype=np.float64) @ self.components


def fit_pca(train: Matrix, k: int) -> PCAFit:
    X = np.asarray(train, dtype=np.float64)
    if not 1 <= k <= min(X.shape):
        raise PreprocessError(f"PCA needs 1 <= k <= min(n_features, n_train) = {min(X.shape)}")
    pca = PCA(n_components=k, svd_solver="full").fit(X)
    components = pca.components_.copy()
    # largest-magnitude entry of each component is positive
    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(k), pivots])
    signs[signs == 0] = 1.0
    components *= signs[:, None]
    return PCAFit(
        mean=pca.mean_.copy(),
        components=components,
        explained_variance=pca.explained_variance_.copy(),
    )


def fit_apply_pca(train: Matrix, other: Matrix, k: int) -> tuple[Matrix, Matrix]:
    fit = fit_pca(train, k)
    return fit.project(train), fit.project(other)


def anova_f_scores(train: Matrix, labels: npt.ArrayLike) -> Matrix:
    """One-way ANOVA F per feature. Zero within-class spread with distinct class
    means gives +inf; no spread at all gives 0."""
    X = np.asarray(train, dtype=np.float64)
    y = np.asarray(labels)
    if np.unique(y).size < 2:
        raise UndefinedFError("ANOVA F needs at least two classes")
    with warnings.catch_warnings(), np.errstate(divide="ignore", invalid="ignore"):
        warnings.simplefilter("ignore", RuntimeWarning)
        warnings.simplefilter("ignore", UserWarning)
        scores, _ = f_classif(X, y)
    scores = np.asarray(scores, dtype=np.float64)
    return np.where(np.isnan(scores), 0.0, scores)


def regression_f_scores(train: Matrix, target: npt.ArrayLike) -> Matrix:
    """Univariate linear-regression F per feature, for continuous targets."""
    X = np.asarray(train, dtype=np.float64)
    with warnings.catch_warnings(), np.errstate(divide="ignore", invalid="ignore"):
        warnings.simplefilter("ignore", RuntimeWarning)
        scores = f_regression(X, np.asarray(target, dtype=np.float64))[0]
    scores = np.asarray(scores, dtype=np.float64)
    return np.where(np.isnan(scores), 0.0, scores)


def select_top_k(scores: npt.ArrayLike, k: int) -> npt.NDArray[np.intp]:
    """Indices of the ``k`` best scores, highest first, ties to the lower index."""
    s = np.asarray(scores, dtype=np.float64)
    if not 1 <= k <= s.size:
        raise PreprocessError(f"cannot select {k} of {s.size} features")
    return np.argsort(-s, kind="stable")[:k]


# ── Fitted pipeline ───────────────────────────────────────────────────


@dataclass(frozen=True)
class PreprocessSpec:
    scaler: Scaler
    reducer: Reducer
    out_dims: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "scaler", Scaler(self.scaler))
        object.__setattr__(self, "reducer", Reducer(self.reducer))
        if self.out_dims < 1:
            raise PreprocessError(f"out_dims must be positive, got {self.out_dims}")

    @property
    def label(self) -> str:
        parts = [s.value for s in (self.scaler, self.reducer) if s.value != "none"]
        return "+".join(parts) or "identity"


@dataclass(frozen=True)
class FittedTransform:
    spec: PreprocessSpec
    # scaler: x * scale + shift, then optional clip to [0, 1]
    scale: Matrix | None = None
    shift: Matrix | None = None
    center: Matrix | None = None
    clip_scaled: bool = False
    pca: PCAFit | None = None
    selected: npt.NDArray[np.intp] | None = None
    box_min: Matrix | None = None
    box_range: Matrix | None = None

    @property
    def unit_box(self) -> bool:
        return self.box_min is not None

    @property
    def kept_features(self) -> npt.NDArray[np.intp] | None:
        """Original column indices kept by feature selection, in original order."""
        return None if self.selected is None else np.sort(self.selected)

    def scale_only(self, X: npt.ArrayLike) -> Matrix:
        out = np.asarray(X, dtype=np.float64)
        if self.spec.scaler is Scaler.MINMAX:
            out = out * self.scale + self.shift
            if self.clip_scaled:
                out = np.clip(out, 0.0, 1.0)
        elif self.spec.scaler is Scaler.STANDARD:
            out = (out - self.center) / self.scale
        return out

    def reduce_only(self, X: Matrix) -> Matrix:
        if self.pca is not None:
            return self.pca.project(X)
        if self.selected is not None:
            return X[:, self.kept_features]
        return X

    def apply(self, X: npt.ArrayLike) -> Matrix:
        out = self.reduce_only(self.scale_only(X))
        if self.box_min is not None:
            out = np.clip((out - self.box_min) / self.box_range, 0.0, 1.0)
        return out


def fit_transform(
    spec: PreprocessSpec,
    X_train: npt.ArrayLike,
    y_train: npt.ArrayLike | None = None,
    *,
    unit_box: bool = True,
    continuous_target: bool = False,
) -> FittedTransform:
    """Fit scaler, reducer and (optionally) the unit-box remap on training rows.

    Feature selection ranks by the ANOVA F of the class labels, or by the
    regression F when ``continuous_target`` is set.
    """
    X = np.asarray(X_train, dtype=np.float64)
    n_train, n_features = X.shape
    if spec.reducer is not Reducer.NONE and spec.out_dims > n_features:
        raise PreprocessError(f"cannot reduce {n_features} features to {spec.out_dims}")
    if spec.reducer is Reducer.NONE and spec.out_dims != n_features:
        raise PreprocessError(
            f"no reducer configured but out_dims={spec.out_dims} != {n_features} features"
        )

    fitted = FittedTransform(spec=spec)
    if spec.scaler is Scaler.MINMAX:
        mm = MinMaxScaler(feature_range=(0.0, 1.0), clip=True).fit(X)
        fitted = replace(fitted, scale=mm.scale_.copy(), shift=mm.min_.copy(), clip_scaled=True)
    elif spec.scaler is Scaler.STANDARD:
        if n_train < 2:
            raise PreprocessError("standard scaling needs at least 2 training rows")
        st = StandardScaler().fit(X)
        fitted = replace(fitted, center=st.mean_.copy(), scale=st.scale_.copy())
    scaled = fitted.scale_only(X)

    if spec.reducer is Reducer.PCA:
        fitted = replace(fitted, pca=fit_pca(scaled, spec.out_dims))
    elif spec.reducer is Reducer.ANOVA_F:
        if y_train is None:
            raise UndefinedFError("feature selection needs a target")
        if continuous_target:
            scores = regression_f_scores(scaled, y_train)
        else:
            scores = anova_f_scores(scaled, encode_labels(y_train)[0])
        fitted = replace(fitted, selected=select_top_k(scores, spec.out_dims))
    reduced = fitted.reduce_only(scaled)

    if unit_box:
        lo = reduced.min(axis=0)
        span = reduced.max(axis=0) - lo
        span[span == 0] = 1.0
        fitted = replace(fitted, box_min=lo, box_range=span)

    logger.debug(
        "transform_fitted",
        pipeline=spec.label,
        n_train=n_train,
        in_dims=n_features,
        out_dims=spec.out_dims,
        unit_box=unit_box,
    )
    return fitted
