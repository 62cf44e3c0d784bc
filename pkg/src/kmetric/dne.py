"""Discriminant neighborhood embedding and its kernel-matrix formulation.

DNE minimizes ``trace(A X (D - W) X' A')`` over row-orthonormal A, where W
holds +1 for same-class neighbor pairs and -1 for different-class ones and
D is the diagonal of W's row sums.  The solution is the d eigenvectors of
``L = X (D - W) X'`` with the smallest eigenvalues; negative eigenvalues
are exactly the discriminative directions, so they are kept.

``kdne_kernel_trick_fit`` solves the same problem written directly in
kernel-matrix variables, ``min trace(U K (D - W) K U')`` under
``U K U' = I``.  That generalized eigenproblem requires a full-rank K; the
rank-deficient case raises, by design, since running DNE on kernel-PCA
coordinates sidesteps the issue entirely.  Both routes reach the same
optimal value on full-rank problems, which the test suite checks.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .kernels import GramMatrix
from .maps import LinearMap
from .neighbors import NeighborGraph
from .numerics import sym_eig

__all__ = ["SingularKernelError", "KdneSolution", "dne_objective", "dne_fit", "kdne_kernel_trick_fit"]


class SingularKernelError(ValueError):
    """The kernel matrix is numerically rank-deficient, so the constraint
    U K U' = I cannot be satisfied."""


class KdneSolution(NamedTuple):
    u: np.ndarray  # (d, n) coefficient rows
    objective: float


def _graph_laplacian(graph: NeighborGraph) -> np.ndarray:
    if graph.mode != "dne":
        raise ValueError("DNE needs a neighbor graph built in 'dne' mode")
    w = graph.w
    return np.diag(w.sum(axis=1)) - w


def dne_objective(a, x: np.ndarray, graph: NeighborGraph) -> float:
    """trace(A X (D - W) X' A') for any map A (rows as projection directions)."""
    a_mat = a.a if isinstance(a, LinearMap) else np.asarray(a, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    z = x @ a_mat.T  # (n, d)
    return float(np.trace(z.T @ _graph_laplacian(graph) @ z))


def dne_fit(x: np.ndarray, labels: np.ndarray, graph: NeighborGraph, d: int) -> LinearMap:
    """Row-orthonormal projection spanned by the d smallest eigenvectors."""
    x = np.asarray(x, dtype=np.float64)
    dim = x.shape[1]
    if not 1 <= d <= dim:
        raise ValueError(f"output dimension d={d} must be in [1, {dim}]")
    lap = _graph_laplacian(graph)
    scatter = x.T @ (lap @ x)
    eig = sym_eig(scatter)
    a = eig.eigenvectors[:, :d].T
    objective = float(eig.eigenvalues[:d].sum())
    return LinearMap(a=a, provenance="dne", objective_trace=(objective,))


def kdne_kernel_trick_fit(
    k, labels: np.ndarray, graph: NeighborGraph, d: int
) -> KdneSolution:
    """Solve K (D - W) K u = lambda K u by whitening with K^{1/2}.

    Requires K numerically full-rank (smallest eigenvalue above
    ``n * eps * lambda_max``); otherwise :class:`SingularKernelError`.
    """
    k_values = k.values if isinstance(k, GramMatrix) else np.asarray(k, dtype=np.float64)
    n = k_values.shape[0]
    if not 1 <= d <= n:
        raise ValueError(f"output dimension d={d} must be in [1, {n}]")
    eig_k = sym_eig(k_values)
    lam_max = float(eig_k.eigenvalues[-1])
    cutoff = n * np.finfo(np.float64).eps * max(lam_max, 0.0)
    if float(eig_k.eigenvalues[0]) <= cutoff:
        raise SingularKernelError("singular kernel matrix")
    root = np.sqrt(eig_k.eigenvalues)
    k_half = (eig_k.eigenvectors * root) @ eig_k.eigenvectors.T
    k_half_inv = (eig_k.eigenvectors / root) @ eig_k.eigenvectors.T
    whitened = k_half @ _graph_laplacian(graph) @ k_half
    eig_w = sym_eig(whitened)
    u = (k_half_inv @ eig_w.eigenvectors[:, :d]).T
    return KdneSolution(u=u, objective=float(eig_w.eigenvalues[:d].sum()))
