"""Learned transformations: explicit linear maps and PSD metric matrices.

A Mahalanobis distance ``(x - y)' M (x - y)`` with PSD ``M = A'A`` equals
the squared Euclidean distance between ``Ax`` and ``Ay``; both forms appear
here because some learners optimize ``A`` and others ``M``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import sym_eig

__all__ = ["LinearMap", "Metric", "metric_to_map", "as_linear_map"]


@dataclass(frozen=True)
class LinearMap:
    """Row-major transformation ``x -> A x`` with fit provenance attached."""

    a: np.ndarray  # (d, D)
    provenance: str = ""
    objective_trace: tuple = ()
    converged: bool = True

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("transformation matrix must be 2-D")
        if not np.isfinite(a).all():
            raise ValueError("transformation matrix contains non-finite entries")
        object.__setattr__(self, "a", a)

    @property
    def out_dim(self) -> int:
        return self.a.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x) @ self.a.T


@dataclass(frozen=True)
class Metric:
    """Symmetric PSD matrix form of a Mahalanobis distance."""

    m: np.ndarray  # (D, D)
    provenance: str = ""
    objective_trace: tuple = ()
    converged: bool = True

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("metric matrix must be square")
        if not np.isfinite(m).all():
            raise ValueError("metric matrix contains non-finite entries")
        object.__setattr__(self, "m", (m + m.T) / 2.0)


def metric_to_map(metric: Metric) -> LinearMap:
    """Factor M = A'A through the eigendecomposition, clipping the tiny
    negative eigenvalues PSD projection can leave behind."""
    eig = sym_eig(metric.m)
    scale = np.sqrt(np.maximum(eig.eigenvalues, 0.0))
    a = scale[:, None] * eig.eigenvectors.T
    return LinearMap(a=a, provenance=metric.provenance or "metric")


def as_linear_map(transform) -> LinearMap:
    if isinstance(transform, LinearMap):
        return transform
    if isinstance(transform, Metric):
        return metric_to_map(transform)
    raise TypeError(f"expected LinearMap or Metric, got {type(transform).__name__}")
