from __future__ import annotations

import csv
import math
from importlib import resources
from pathlib import Path

import numpy as np
import structlog

from musebench.data.preprocess import RawDataset
from musebench.errors import IngestionError

logger = structlog.get_logger()

IRIS_RESOURCE = "iris.csv"


def _parse_float(text: str) -> float | None:
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def load_csv(path: str | Path) -> RawDataset:
    """Read a header + rows CSV; every column but the last is a numeric feature and
    the last column is the target.

    A fully numeric target stays a float array. Otherwise the target is treated as
    class labels and mapped to 0..k-1 in first-appearance order.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise IngestionError(f"{path} is not UTF-8 text: {exc.reason} at byte {exc.start}") from exc
    except csv.Error as exc:
        raise IngestionError(f"{path} is not valid CSV: {exc}") from exc
    return _parse_rows(rows, source=str(path))


def _parse_rows(rows: list[list[str]], *, source: str) -> RawDataset:
    # (line number, fields); blank lines are skipped but keep their numbering
    numbered = [(i, r) for i, r in enumerate(rows, start=1) if any(c.strip() for c in r)]
    if not numbered:
        raise IngestionError(f"{source} is empty")
    header_line, header = numbered[0]
    header = [c.strip() for c in header]
    if len(header) < 2:
        raise IngestionError(
            f"{source} needs at least one feature column and a target column", line=header_line
        )
    body = numbered[1:]
    if not body:
        raise IngestionError(f"{source} has a header but no data rows", line=header_line)

    feature_names = header[:-1]
    n_features = len(feature_names)
    X = np.empty((len(body), n_features), dtype=np.float64)
    targets: list[str] = []
    for r, (line, fields) in enumerate(body):
        if len(fields) != len(header):
            raise IngestionError(
                f"expected {len(header)} fields, got {len(fields)}", line=line
            )
        for c in range(n_features):
            value = _parse_float(fields[c].strip())
            if value is None:
                raise IngestionError(
                    f"non-numeric feature value {fields[c]!r}", line=line, column=feature_names[c]
                )
            X[r, c] = value
        targets.append(fields[-1].strip())

    numeric = [_parse_float(t) for t in targets]
    if all(v is not None for v in numeric):
        ds = RawDataset(X=X, y=np.array(numeric, dtype=np.float64), feature_names=tuple(feature_names))
    else:
        order: dict[str, int] = {}
        y = np.array([order.setdefault(t, len(order)) for t in targets], dtype=np.int64)
        ds = RawDataset(X=X, y=y, feature_names=tuple(feature_names), class_names=tuple(order))

    logger.info(
        "dataset_loaded",
        source=source,
        n_samples=ds.n_samples,
        n_features=ds.n_features,
        n_classes=len(ds.class_names) if ds.class_names else None,
    )
    return ds


def load_iris() -> RawDataset:
    """The bundled 150-sample, 4-feature, 3-class Iris table."""
    text = resources.files("musebench.data").joinpath(IRIS_RESOURCE).read_text(encoding="utf-8")
    return _parse_rows(list(csv.reader(text.splitlines())), source=IRIS_RESOURCE)


def make_linear_regression(
    n_samples: int = 200,
    n_features: int = 2,
    *,
    noise: float = 0.1,
    seed: int = 0,
) -> RawDataset:
    """Synthetic regression fixture: ``y = X @ w + b + N(0, noise^2)`` with
    features uniform on [0, 1] and fixed coefficients."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(n_samples, n_features))
    w = np.linspace(1.0, -0.5, n_features) if n_features > 1 else np.array([1.0])
    y = X @ w + 0.25 + rng.normal(0.0, noise, size=n_samples)
    return RawDataset(
        X=X,
        y=y,
        feature_names=tuple(f"x{i}" for i in range(n_features)),
    )
