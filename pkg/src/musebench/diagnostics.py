"""Trace-difference study: how far a preprocessing variant moves the encoding.

Each sample is encoded by a one-layer phase circuit (H then P(x_i) on qubit i).
The report for a variant is the mean over samples of
``|Tr U(variant(x)) - Tr U(reference(x))|``, where the reference is the
unprocessed sample restricted to the columns the variant keeps (feature
selection), its first ``k`` columns (PCA), or all of it (scalers alone). On
datasets wider than the unitary limit the unreduced rows use the first ``k``
columns too.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import numpy.typing as npt
import structlog

from musebench.data.preprocess import (
    FittedTransform,
    PreprocessSpec,
    RawDataset,
    Reducer,
    Scaler,
    fit_transform,
)
from musebench.errors import CapacityError, EncodingError
from musebench.results.record import atomic_write_text
from musebench.sim.statevec import MAX_UNITARY_QUBITS, Circuit, GateOp, h, p, unitary_of

logger = structlog.get_logger()

REPORT_HEADER = ("variant", "mean_trace_diff", "n_samples")


@dataclass(frozen=True)
class TraceReport:
    variant: str
    mean_trace_diff: float
    per_sample: npt.NDArray[np.float64] = field(repr=False)

    @property
    def n_samples(self) -> int:
        return int(self.per_sample.size)


def reference_phase_circuit(x: npt.ArrayLike) -> Circuit:
    xs = np.asarray(x, dtype=np.float64).ravel()
    if xs.size == 0 or not np.all(np.isfinite(xs)):
        raise EncodingError("phase circuit needs at least one finite feature")
    ops: list[GateOp] = []
    for q, v in enumerate(xs):
        ops.append(h(q))
        ops.append(p(float(v), q))
    return Circuit(xs.size, tuple(ops))


def circuit_trace(x: npt.ArrayLike) -> complex:
    return complex(np.trace(unitary_of(reference_phase_circuit(x))))


def _reference_columns(fitted: FittedTransform, n_features: int, k: int) -> npt.NDArray[np.intp]:
    kept = fitted.kept_features
    if kept is not None:
        return kept
    if fitted.spec.reducer is Reducer.PCA:
        return np.arange(k)
    return np.arange(n_features)


def mean_trace_difference(
    X: npt.ArrayLike, fitted: FittedTransform, *, label: str | None = None
) -> TraceReport:
    """Compare each sample's variant encoding against its reference encoding."""
    data = np.asarray(X, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise EncodingError(f"expected a non-empty samples x features matrix, got {data.shape}")
    k = fitted.spec.out_dims
    if k > MAX_UNITARY_QUBITS:
        raise CapacityError(f"trace study on {k} features exceeds {MAX_UNITARY_QUBITS} qubits")

    variant = fitted.apply(data)
    reference = data[:, _reference_columns(fitted, data.shape[1], k)]
    diffs = np.array(
        [abs(circuit_trace(v) - circuit_trace(r)) for v, r in zip(variant, reference, strict=True)]
    )
    return TraceReport(label or fitted.spec.label, float(np.mean(diffs)), diffs)


def _variants(n_features: int, k: int, single_stage: bool) -> list[tuple[str, PreprocessSpec]]:
    # unreduced rows keep the first k columns once every column would not fit
    width = n_features if n_features <= MAX_UNITARY_QUBITS else k
    specs = [("identity", PreprocessSpec(Scaler.NONE, Reducer.NONE, width))]
    for scaler in (Scaler.MINMAX, Scaler.STANDARD):
        for reducer in (Reducer.PCA, Reducer.ANOVA_F):
            spec = PreprocessSpec(scaler, reducer, k)
            specs.append((spec.label, spec))
    if single_stage:
        for scaler in (Scaler.MINMAX, Scaler.STANDARD):
            specs.append((scaler.value, PreprocessSpec(scaler, Reducer.NONE, width)))
        for reducer in (Reducer.ANOVA_F, Reducer.PCA):
            specs.append((reducer.value, PreprocessSpec(Scaler.NONE, reducer, k)))
    return specs


def trace_study(
    ds: RawDataset, k: int = 3, *, single_stage: bool = False, continuous_target: bool = False
) -> list[TraceReport]:
    """Identity plus {mm, std} x {pca, f} (and the single-stage rows when asked),
    each fitted on every sample. Only ``k`` is bounded by the unitary limit."""
    if not 1 <= k <= ds.n_features:
        raise EncodingError(f"k must be in 1..{ds.n_features}, got {k}")
    reports = []
    for label, spec in _variants(ds.n_features, k, single_stage):
        X = ds.X if spec.reducer is not Reducer.NONE else ds.X[:, : spec.out_dims]
        fitted = fit_transform(spec, X, ds.y, unit_box=False, continuous_target=continuous_target)
        report = mean_trace_difference(X, fitted, label=label)
        logger.info(
            "trace_variant_done",
            variant=label,
            mean_trace_diff=report.mean_trace_diff,
            n_samples=report.n_samples,
        )
        reports.append(report)
    return reports


def render_report(reports: Sequence[TraceReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for r in reports:
        writer.writerow((r.variant, repr(r.mean_trace_diff), r.n_samples))
    return buf.getvalue()


def write_report(reports: Sequence[TraceReport], path: str | Path) -> Path:
    out = atomic_write_text(Path(path), render_report(reports))
    logger.info("trace_report_written", path=str(out), rows=len(reports))
    return out
