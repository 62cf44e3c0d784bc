"""Neighborhood component analysis: a soft leave-one-out kNN objective.

Each point i assigns its neighbors softmax weights
``p_ij = exp(-||Ax_i - Ax_j||^2) / sum_{k != i} exp(-||Ax_i - Ax_k||^2)``
(with ``p_ii = 0``) and the loss is minus the total weight landing on
same-class neighbors, so the optimum of 0 - n is approached when every
point's soft vote is entirely within its class.  The objective is smooth
but not convex; we run plain gradient descent with Armijo backtracking from
an identity initialization, which makes runs deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .maps import LinearMap

__all__ = ["GradientDescentConfig", "nca_objective", "nca_gradient", "nca_fit"]


@dataclass(frozen=True)
class GradientDescentConfig:
    max_iter: int = 100
    grad_tol: float = 1e-6
    armijo_beta: float = 0.5
    armijo_c1: float = 1e-4
    initial_step: float = 1.0
    max_backtracks: int = 40


def _as_matrix(a) -> np.ndarray:
    return a.a if isinstance(a, LinearMap) else np.asarray(a, dtype=np.float64)


def _soft_assignments(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Row-stochastic P with P_ii = 0, stabilized by the per-row maximum."""
    z = x @ a.T
    sq = (z * z).sum(axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (z @ z.T), 0.0)
    np.fill_diagonal(d2, np.inf)
    logits = -d2
    shift = logits.max(axis=1, keepdims=True)
    p = np.exp(logits - shift)
    np.fill_diagonal(p, 0.0)
    return p / p.sum(axis=1, keepdims=True)


def nca_objective(a, x: np.ndarray, labels: np.ndarray) -> float:
    """Minus the expected number of correct soft LOO votes; in [-n, 0]."""
    x = np.asarray(x, dtype=np.float64)
    p = _soft_assignments(_as_matrix(a), x)
    same = np.asarray(labels)[:, None] == np.asarray(labels)[None, :]
    return float(-p[same].sum())


def nca_gradient(a, x: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Analytic gradient of :func:`nca_objective` with respect to A.

    Uses the graph-Laplacian identity
    ``sum_ik c_ik (x_i - x_k)(x_i - x_k)' = X' (diag(r) + diag(s) - C - C') X``
    with r, s the row/column sums of C, so the whole thing is a few dense
    matrix products.
    """
    a = _as_matrix(a)
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    p = _soft_assignments(a, x)
    same = labels[:, None] == labels[None, :]
    p_in = (p * same).sum(axis=1)  # per-point same-class soft vote
    coeff = p * (p_in[:, None] - same)
    row = coeff.sum(axis=1)
    col = coeff.sum(axis=0)
    lap = np.diag(row + col) - (coeff + coeff.T)
    return -2.0 * a @ (x.T @ (lap @ x))


def nca_fit(
    x: np.ndarray,
    labels: np.ndarray,
    d: int,
    opt: GradientDescentConfig = GradientDescentConfig(),
) -> LinearMap:
    """Gradient descent on the NCA loss from an identity-rows start.

    Every accepted step decreases the objective (Armijo), so the returned
    map never scores worse than the initialization.  If the line search
    stalls the best iterate so far comes back flagged ``converged=False``.
    """
    x = np.asarray(x, dtype=np.float64)
    n, dim = x.shape
    if not 1 <= d <= dim:
        raise ValueError(f"output dimension d={d} must be in [1, {dim}]")
    if n < 2:
        raise ValueError("need at least two points")
    a = np.eye(d, dim)
    f = nca_objective(a, x, labels)
    trace = [f]
    step = opt.initial_step
    converged = True
    for _ in range(opt.max_iter):
        grad = nca_gradient(a, x, labels)
        grad_sq = float((grad * grad).sum())
        if np.sqrt(grad_sq) <= opt.grad_tol:
            break
        accepted = False
        for _ in range(opt.max_backtracks):
            candidate = a - step * grad
            f_new = nca_objective(candidate, x, labels)
            if f_new <= f - opt.armijo_c1 * step * grad_sq:
                accepted = True
                break
            step *= opt.armijo_beta
        if not accepted:
            converged = False
            break
        a, f = candidate, f_new
        trace.append(f)
        step *= 2.0  # let the accepted step grow back
    return LinearMap(a=a, provenance="nca", objective_trace=tuple(trace), converged=converged)
