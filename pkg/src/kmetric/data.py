"""Dataset container, CSV ingestion, standardization, splits, synthetic data."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "Dataset",
    "SplitPlan",
    "Standardizer",
    "load_csv",
    "standardize",
    "fit_standardizer",
    "split",
    "make_synthetic",
]


@dataclass(frozen=True)
class Dataset:
    """A labeled sample: real feature rows plus dense integer class labels.

    Labels live in ``{0, ..., class_count - 1}``.  Features must be finite;
    callers that need preprocessing (imputation etc.) do it before
    construction.
    """

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    feature_names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise ValueError("labels must be 1-D with one entry per feature row")
        if not np.isfinite(features).all():
            raise ValueError("features contain non-finite values")
        if self.class_count < 1:
            raise ValueError("class_count must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise ValueError("labels must lie in [0, class_count)")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        """Row subset sharing this dataset's label encoding."""
        idx = np.asarray(indices)
        return Dataset(
            features=self.features[idx],
            labels=self.labels[idx],
            class_count=self.class_count,
            feature_names=self.feature_names,
        )


@dataclass(frozen=True)
class SplitPlan:
    """Repeated random train/test partitions, reproducible from the seed."""

    seed: int
    train_size: int
    repetitions: int = 1

    def __post_init__(self):
        if self.train_size < 1:
            raise ValueError("train_size must be positive")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")


def _is_float(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def load_csv(path, label_column) -> Dataset:
    """Load a comma-separated table with one categorical label column.

    The header row is auto-detected (present when the first row has any
    non-numeric cell).  ``label_column`` is either a 0-based column index or
    a header name.  Labels are re-encoded to 0..p-1 in order of first
    appearance; row order is preserved.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"empty dataset file: {path}")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("ragged CSV: rows have differing column counts")

    if isinstance(label_column, str):
        # a named label column implies the file carries a header row
        try:
            label_idx = rows[0].index(label_column)
        except ValueError:
            raise ValueError(f"no column named {label_column!r} in {path}") from None
        has_header = True
    else:
        label_idx = int(label_column)
        if label_idx < 0:
            label_idx += width
        if not 0 <= label_idx < width:
            raise ValueError(f"label column index {label_column} out of range")
        # header detection must ignore the label column, which is categorical;
        # blank cells are data defects, not header names
        has_header = any(
            not _is_float(cell) and cell.strip() != ""
            for j, cell in enumerate(rows[0])
            if j != label_idx
        )
    header = rows[0] if has_header else None
    body = rows[1:] if has_header else rows
    if not body:
        raise ValueError(f"no data rows in {path}")

    feature_cols = [j for j in range(width) if j != label_idx]
    features = np.empty((len(body), len(feature_cols)))
    for i, row in enumerate(body):
        for k, j in enumerate(feature_cols):
            cell = row[j].strip()
            if not _is_float(cell):
                raise ValueError(f"non-numeric feature at row {i + 1}, column {j}: {cell!r}")
            features[i, k] = float(cell)
    if not np.isfinite(features).all():
        raise ValueError("non-numeric feature: file contains NaN or infinite values")

    encoding: dict[str, int] = {}
    labels = np.empty(len(body), dtype=np.int64)
    for i, row in enumerate(body):
        key = row[label_idx].strip()
        if key not in encoding:
            encoding[key] = len(encoding)
        labels[i] = encoding[key]
    if len(encoding) < 2:
        raise ValueError(f"need at least two classes, found {len(encoding)} in {path}")

    names = tuple(header[j] for j in feature_cols) if header else None
    return Dataset(features=features, labels=labels, class_count=len(encoding), feature_names=names)


@dataclass(frozen=True)
class Standardizer:
    """Per-column location/scale fitted on one dataset, applied to any other.

    Scale is the population standard deviation (divide by n).  Columns that
    are constant in the fitting data get scale 0 and map to all-zero output
    instead of NaN.
    """

    mean: np.ndarray
    scale: np.ndarray

    def apply(self, ds: Dataset) -> Dataset:
        if ds.dim != self.mean.shape[0]:
            raise ValueError("dimension mismatch between standardizer and dataset")
        centered = ds.features - self.mean
        safe = np.where(self.scale > 0.0, self.scale, 1.0)
        out = centered / safe
        out[:, self.scale == 0.0] = 0.0
        return Dataset(out, ds.labels, ds.class_count, ds.feature_names)


def fit_standardizer(ds: Dataset) -> Standardizer:
    if ds.n < 2:
        raise ValueError("standardization needs at least two rows")
    mean = ds.features.mean(axis=0)
    var = ((ds.features - mean) ** 2).mean(axis=0)
    return Standardizer(mean=mean, scale=np.sqrt(var))


def standardize(ds: Dataset) -> Dataset:
    """Center each column to mean 0 and population variance 1."""
    return fit_standardizer(ds).apply(ds)


def _split_rng(seed: int, rep: int, attempt: int) -> np.random.Generator:
    return np.random.default_rng([seed, rep, attempt])


def split(ds: Dataset, plan: SplitPlan, rep: int) -> tuple[Dataset, Dataset]:
    """Deterministic random train/test partition number ``rep``.

    Not stratified, but permutations are redrawn until every class present
    in ``ds`` appears in the training part, so downstream learners stay
    well-defined.
    """
    if not 0 <= rep < plan.repetitions:
        raise ValueError(f"rep {rep} outside plan with {plan.repetitions} repetitions")
    if plan.train_size >= ds.n:
        raise ValueError(f"train_size {plan.train_size} must be < n = {ds.n}")
    present = np.unique(ds.labels)
    for attempt in range(1000):
        perm = _split_rng(plan.seed, rep, attempt).permutation(ds.n)
        train_idx = perm[: plan.train_size]
        if np.isin(present, ds.labels[train_idx]).all():
            return ds.subset(np.sort(train_idx)), ds.subset(np.sort(perm[plan.train_size :]))
    raise RuntimeError("could not draw a split containing every class")


def make_synthetic(kind: str, n_per_class: int, noise: float, seed: int) -> Dataset:
    """2-D two-class sets whose classes live on 1-D nonlinear manifolds.

    ``concentric-circles``: class 0 on radius 1, class 1 on radius 2, with
    Gaussian radial noise.  ``interleaved-curves``: two sine arcs offset
    vertically, Gaussian noise on the height.
    """
    if n_per_class < 2:
        raise ValueError("n_per_class must be at least 2")
    if noise < 0:
        raise ValueError("noise must be nonnegative")
    rng = np.random.default_rng([seed, 0x5C1E])
    if kind == "concentric-circles":
        theta = rng.uniform(0.0, 2.0 * np.pi, size=2 * n_per_class)
        radius = np.concatenate([np.full(n_per_class, 1.0), np.full(n_per_class, 2.0)])
        radius = radius + rng.normal(0.0, 1.0, size=2 * n_per_class) * noise
        features = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    elif kind == "interleaved-curves":
        t = rng.uniform(0.0, 2.0 * np.pi, size=2 * n_per_class)
        height = np.sin(t)
        height[n_per_class:] += 1.0
        height = height + rng.normal(0.0, 1.0, size=2 * n_per_class) * noise
        features = np.column_stack([t, height])
    else:
        raise ValueError(f"unknown synthetic kind: {kind!r}")
    labels = np.repeat(np.arange(2, dtype=np.int64), n_per_class)
    return Dataset(features=features, labels=labels, class_count=2)
