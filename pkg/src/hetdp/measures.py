"""Noise-free heterogeneity statistics over bounded-vector datasets.

All statistics are reported as scalars with a coordinate-sum convention:
per-vector quantities sum their d coordinates, and dataset-level statistics
average the per-vector scalars over the n vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Within-vector variances are clamped below by this before inversion into
#: weights, so constant rows (zero variance) get a large finite weight.
VARIANCE_FLOOR = 1e-9


@dataclass(frozen=True)
class VectorDataset:
    """n vectors in [0,1]^d with one nonnegative integer label per vector."""

    vectors: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        vectors = np.asarray(self.vectors, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if vectors.ndim != 2:
            raise ValueError(f"vectors must be a 2-d array, got shape {vectors.shape}")
        if vectors.shape[0] < 1:
            raise ValueError("dataset must contain at least one vector")
        if labels.ndim != 1 or labels.shape[0] != vectors.shape[0]:
            raise ValueError(
                f"labels must be one per vector: {labels.shape} labels for "
                f"{vectors.shape[0]} vectors"
            )
        if not np.all(np.isfinite(vectors)):
            raise ValueError("vectors contain non-finite coordinates")
        if vectors.min() < 0.0 or vectors.max() > 1.0:
            raise ValueError(
                f"coordinates must lie in [0, 1], got range "
                f"[{vectors.min()!r}, {vectors.max()!r}]"
            )
        if labels.min(initial=0) < 0:
            raise ValueError("labels must be nonnegative integers")
        vectors.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class MeasureContext:
    """Per-dataset quantities shared by the weighted statistics.

    weights[i] is 1 / max(within_variances[i], variance_floor); the weighted
    mean is the weights-normalized average of the rows.
    """

    mean: np.ndarray
    weighted_mean: np.ndarray
    weights: np.ndarray
    within_variances: np.ndarray
    variance_floor: float = VARIANCE_FLOOR


@dataclass(frozen=True)
class HeterogeneityReport:
    """True (noise-free) values of the three heterogeneity statistics."""

    dispersion: float
    q_value: float
    i_squared: float
    dispersion_exponent: float = 2.0


def dataset_mean(data: VectorDataset) -> np.ndarray:
    """Coordinate-wise arithmetic mean of the dataset rows."""
    return data.vectors.mean(axis=0)


def within_vector_variance(vector: np.ndarray) -> float:
    """Population variance of one vector's coordinates (divide by d).

    For coordinates in [0, 1] the result lies in [0, 0.25].
    """
    vector = np.asarray(vector, dtype=np.float64)
    if vector.ndim != 1 or vector.size < 1:
        raise ValueError(f"expected a nonempty 1-d vector, got shape {vector.shape}")
    return float(vector.var())


def weights_from_variances(
    within_variances: np.ndarray, variance_floor: float = VARIANCE_FLOOR
) -> np.ndarray:
    """Inverse-variance weights w_i = 1 / max(s_i^2, variance_floor)."""
    if not variance_floor > 0:
        raise ValueError(f"variance floor must be positive, got {variance_floor!r}")
    within_variances = np.asarray(within_variances, dtype=np.float64)
    return 1.0 / np.maximum(within_variances, variance_floor)


def weighted_mean(data: VectorDataset, weights: np.ndarray) -> np.ndarray:
    """Weights-normalized mean (sum_i w_i x_i) / (sum_i w_i), coordinate-wise.

    Equal weights reduce this to dataset_mean.

    Raises:
        ValueError: on nonpositive, non-finite, or wrongly shaped weights.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (data.n,):
        raise ValueError(f"need one weight per vector: {weights.shape} for n={data.n}")
    if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
        raise ValueError("weights must be positive and finite")
    return weights @ data.vectors / weights.sum()


def build_context(data: VectorDataset, variance_floor: float = VARIANCE_FLOOR) -> MeasureContext:
    """Compute mean, within-vector variances, weights and weighted mean once."""
    within = data.vectors.var(axis=1)
    weights = weights_from_variances(within, variance_floor)
    return MeasureContext(
        mean=dataset_mean(data),
        weighted_mean=weighted_mean(data, weights),
        weights=weights,
        within_variances=within,
        variance_floor=variance_floor,
    )


def dispersion(data: VectorDataset, p: float = 2.0) -> float:
    """Mean p-th power deviation of the rows from the dataset mean.

    Per row the deviation is sum_j |x_ij - mean_j|^p; the dataset value
    averages the row scalars. p = 2 is the variance case.

    Raises:
        ValueError: if p < 1.
    """
    if not (math.isfinite(p) and p >= 1.0):
        raise ValueError(f"dispersion exponent must be >= 1, got {p!r}")
    deviations = data.vectors - dataset_mean(data)
    if p == 2.0:
        # integer-exponent squaring, so the zero-noise estimator path
        # reproduces this value bit for bit
        powered = deviations**2
    else:
        powered = np.abs(deviations) ** p
    return float(powered.sum(axis=1).mean())


def q_statistic(data: VectorDataset, ctx: MeasureContext) -> float:
    """Weighted squared deviation from the weighted mean, averaged over rows.

    Q = (1/n) sum_i w_i * sum_j (x_ij - weighted_mean_j)^2. Unit weights
    reduce Q to dispersion at p = 2.
    """
    if ctx.weights.shape != (data.n,) or ctx.weighted_mean.shape != (data.d,):
        raise ValueError(
            f"context shaped for (n={ctx.weights.shape}, d={ctx.weighted_mean.shape}) "
            f"does not match dataset (n={data.n}, d={data.d})"
        )
    squared = ((data.vectors - ctx.weighted_mean) ** 2).sum(axis=1)
    return float((ctx.weights * squared).mean())


def i_squared(q_value: float, n: int) -> float:
    """Heterogeneity fraction max{0, 1 - (n-1)/Q} in [0, 1].

    Raises:
        ValueError: if n < 2 (the n-1 numerator degenerates) or q_value < 0.
    """
    if n < 2:
        raise ValueError(f"i_squared needs n >= 2, got n={n}")
    if not (math.isfinite(q_value) and q_value >= 0):
        raise ValueError(f"q_value must be nonnegative and finite, got {q_value!r}")
    if q_value == 0.0:
        return 0.0
    return max(0.0, 1.0 - (n - 1) / q_value)


def measure_all(data: VectorDataset, p: float = 2.0) -> tuple[HeterogeneityReport, MeasureContext]:
    """All three true statistics plus the shared context in one pass."""
    ctx = build_context(data)
    q_value = q_statistic(data, ctx)
    report = HeterogeneityReport(
        dispersion=dispersion(data, p),
        q_value=q_value,
        i_squared=i_squared(q_value, data.n) if data.n >= 2 else 0.0,
        dispersion_exponent=p,
    )
    return report, ctx
