"""Explicit feature-space coordinates via kernel PCA.

Fitting double-centers the training Gram matrix (``H K H`` with
``H = I - 11'/n``), eigendecomposes it, and keeps the eigendirections above
a numerical-rank cutoff.  Each point, training or new, then gets finite
coordinates whose inner products reproduce the centered kernel, so any
linear learner run on the coordinates is operating in the kernel's feature
space.  At full numerical rank the embedding is an isometry: pairwise
coordinate distances equal kernel-induced feature-space distances.

New points are centered with the stored training statistics:
``k_c = k' - mean(k') - col_means + grand_mean`` per entry, which is the
``H``-matrix identity applied to a test column.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Dataset
from .kernels import GramMatrix, KernelSpec, cross_gram, gram
from .numerics import sym_eig

__all__ = ["KpcaModel", "DegenerateKernelError", "kpca_fit", "kpca_transform"]


class DegenerateKernelError(ValueError):
    """Every centered eigenvalue fell below the rank cutoff (all points
    coincide in feature space)."""


@dataclass(frozen=True)
class KpcaModel:
    """Fitted feature-space coordinate system for one kernel + training set."""

    kernel: KernelSpec
    train_points: Dataset
    centered_eigvals: np.ndarray  # descending, all above the cutoff
    projection: np.ndarray  # (n, r): centered kernel column -> coordinates
    rank: int
    col_means: np.ndarray  # column means of the training Gram
    grand_mean: float
    train_coords: np.ndarray  # (n, r) embedded training points

    @property
    def out_dim(self) -> int:
        return self.rank


def kpca_fit(spec: KernelSpec, train: Dataset, max_dim: Optional[int] = None) -> KpcaModel:
    """Fit the coordinate system from the training Gram matrix.

    Eigenvalues at or below ``n * eps * lambda_max`` are treated as zero
    (numerical rank); ``max_dim`` optionally truncates to the leading
    directions for speed.
    """
    if train.n < 2:
        raise ValueError("kernel PCA needs at least two training points")
    k = gram(spec, train)
    return kpca_fit_from_gram(k, max_dim=max_dim)


def kpca_fit_from_gram(k: GramMatrix, max_dim: Optional[int] = None) -> KpcaModel:
    """Same as :func:`kpca_fit` when the Gram matrix is already available."""
    train = k.row_points
    n = train.n
    col_means = k.values.mean(axis=0)
    grand_mean = float(k.values.mean())
    centered = k.values - col_means[None, :] - col_means[:, None] + grand_mean

    eig = sym_eig(centered)
    cutoff = n * np.finfo(np.float64).eps * max(float(eig.eigenvalues[-1]), 0.0)
    keep = np.where(eig.eigenvalues > cutoff)[0]
    if keep.size == 0:
        raise DegenerateKernelError("all centered eigenvalues are below the rank cutoff")
    keep = keep[::-1]  # descending eigenvalue order
    if max_dim is not None:
        if max_dim < 1:
            raise ValueError("max_dim must be positive")
        keep = keep[:max_dim]
    eigvals = eig.eigenvalues[keep]
    vecs = eig.eigenvectors[:, keep]
    projection = vecs / np.sqrt(eigvals)[None, :]
    train_coords = vecs * np.sqrt(eigvals)[None, :]
    return KpcaModel(
        kernel=k.spec,
        train_points=train,
        centered_eigvals=eigvals,
        projection=projection,
        rank=int(keep.size),
        col_means=col_means,
        grand_mean=grand_mean,
        train_coords=train_coords,
    )


def kpca_transform(model: KpcaModel, points: Dataset) -> np.ndarray:
    """Coordinates of arbitrary points in the fitted system (n_points x r)."""
    if points.dim != model.train_points.dim:
        raise ValueError(
            f"dimension mismatch: model fitted on {model.train_points.dim}-dimensional "
            f"data, got {points.dim}"
        )
    kx = cross_gram(model.kernel, model.train_points, points)
    centered = kx - kx.mean(axis=1, keepdims=True) - model.col_means[None, :] + model.grand_mean
    return centered @ model.projection
