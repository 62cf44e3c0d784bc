"""Kernel construction from a bank of base kernels.

Three routes:

* ``align_qp``: maximize alignment with the label-derived ideal kernel over
  nonnegative combinations.  Fixing the numerator of the alignment ratio to
  1 turns this into the QP ``min g' S' g`` over ``g >= 0, g'b' = 1`` on
  Frobenius-normalized base Grams.
* ``align_lp``: same constraints but minimizing an entrywise-L1 upper bound
  of the combined Gram's Frobenius norm, which is an LP and drives most
  weights to exact zero.  Banks whose Grams are entrywise nonnegative (all
  RBF banks) use the direct linear objective; otherwise the split-variable
  form is solved.
* ``unweighted_sum``: just add all base kernels with weight one.  Up to an
  invertible block scaling of feature spaces this loses nothing at the
  optimum, and it costs essentially nothing to build.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data import Dataset
from .kernels import (
    GramMatrix,
    IdealKernel,
    KernelSpec,
    WeightedSum,
    alignment,
    gram,
)
from .numerics import InfeasibleProblemError, QpProblem, solve_lp, solve_qp

__all__ = ["KernelBank", "AlignmentSolution", "build_bank", "align_qp", "align_lp", "unweighted_sum"]

WEIGHT_FLOOR = 1e-10  # weights below this are reported as exact zeros


@dataclass(frozen=True)
class KernelBank:
    """Base kernels with their Grams on one training set.

    ``base_specs`` entries may be None for matrix-only banks (e.g. when a
    target matrix itself is injected as a base in tests); such banks cannot
    be turned back into a kernel function.
    """

    base_specs: tuple
    base_grams: tuple  # of (n, n) ndarrays
    normalized: bool

    def __post_init__(self):
        if len(self.base_grams) < 1:
            raise ValueError("a kernel bank needs at least one base kernel")
        if len(self.base_specs) != len(self.base_grams):
            raise ValueError("specs and Grams must pair up")
        shape = self.base_grams[0].shape
        if any(g.shape != shape for g in self.base_grams):
            raise ValueError("all base Grams must share one shape")

    @property
    def size(self) -> int:
        return len(self.base_grams)


@dataclass(frozen=True)
class AlignmentSolution:
    """Nonnegative combination weights over the bank's raw base kernels."""

    weights: np.ndarray
    achieved_alignment: float
    method: str  # qp | lp | unweighted
    solver_residual: float

    def __post_init__(self):
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if not np.any(self.weights > 0):
            raise ValueError("at least one weight must be positive")


def build_bank(specs: Sequence[KernelSpec], ds: Dataset) -> KernelBank:
    """Evaluate every base kernel on the dataset (raw, unnormalized Grams)."""
    grams = tuple(gram(spec, ds).values for spec in specs)
    return KernelBank(base_specs=tuple(specs), base_grams=grams, normalized=False)


def bank_from_grams(grams: Sequence[np.ndarray], specs: Optional[Sequence] = None) -> KernelBank:
    grams = tuple(np.asarray(g, dtype=np.float64) for g in grams)
    if specs is None:
        specs = (None,) * len(grams)
    return KernelBank(base_specs=tuple(specs), base_grams=grams, normalized=False)


def _normalized_grams(bank: KernelBank) -> tuple[list[np.ndarray], np.ndarray]:
    norms = np.array([float(np.linalg.norm(g)) for g in bank.base_grams])
    if np.any(norms == 0.0):
        raise ValueError("bank contains a zero Gram matrix")
    if bank.normalized:
        return list(bank.base_grams), np.ones(bank.size)
    return [g / f for g, f in zip(bank.base_grams, norms)], norms


def _combine(grams: Sequence[np.ndarray], weights: np.ndarray) -> np.ndarray:
    out = np.zeros_like(grams[0])
    for w, g in zip(weights, grams):
        if w != 0.0:
            out += w * g
    return out


def _raw_weights(weights_normalized: np.ndarray, norms: np.ndarray) -> np.ndarray:
    """Translate weights over normalized Grams to weights over raw kernels."""
    raw = weights_normalized / norms
    raw[raw < WEIGHT_FLOOR] = 0.0
    return raw


def align_qp(bank: KernelBank, y: IdealKernel, tol: float = 1e-8) -> AlignmentSolution:
    """Alignment-optimal nonnegative combination via the simplex-constrained QP.

    Base kernels whose Frobenius product with the target is nonpositive can
    only get weight zero at the optimum of the normalized problem, so they
    are pinned there and the QP runs on the rest.
    """
    normalized, norms = _normalized_grams(bank)
    b = np.array([float(np.tensordot(g, y.values)) for g in normalized])
    usable = b > 0.0
    if not np.any(usable):
        raise InfeasibleProblemError("no base kernel is positively aligned with the target")
    kept = [g for g, u in zip(normalized, usable) if u]
    m = len(kept)
    s = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            s[i, j] = s[j, i] = float(np.tensordot(kept[i], kept[j]))
    solution = solve_qp(QpProblem(s=s, b=b[usable]), tol=tol)
    weights = np.zeros(bank.size)
    weights[usable] = solution.alpha
    weights[weights < WEIGHT_FLOOR] = 0.0
    combined = _combine(normalized, weights)
    return AlignmentSolution(
        weights=_raw_weights(weights, norms),
        achieved_alignment=alignment(combined, y.values),
        method="qp",
        solver_residual=solution.kkt_residual,
    )


def align_lp(bank: KernelBank, y: IdealKernel, tol: float = 1e-9) -> AlignmentSolution:
    """Sparse alignment weights from the L1 upper-bound linear program."""
    normalized, norms = _normalized_grams(bank)
    b = np.array([float(np.tensordot(g, y.values)) for g in normalized])
    if not np.any(b > 0.0):
        raise InfeasibleProblemError("no base kernel is positively aligned with the target")
    m = bank.size
    if all(np.all(g >= 0.0) for g in normalized):
        # entrywise-nonnegative Grams: ||vec(K)||_1 is linear in the weights
        cost = np.array([float(g.sum()) for g in normalized])
        weights = solve_lp(cost, a_eq=b[None, :], b_eq=np.array([1.0]), tol=tol)
    else:
        # split |K_uv| <= t_uv: variables (weights, t), minimize sum t
        n2 = normalized[0].size
        stacked = np.stack([g.ravel() for g in normalized], axis=1)  # (n2, m)
        cost = np.concatenate([np.zeros(m), np.ones(n2)])
        a_ub = np.block(
            [
                [stacked, -np.eye(n2)],
                [-stacked, -np.eye(n2)],
            ]
        )
        b_ub = np.zeros(2 * n2)
        a_eq = np.concatenate([b, np.zeros(n2)])[None, :]
        solution = solve_lp(cost, a_eq=a_eq, b_eq=np.array([1.0]), a_ub=a_ub, b_ub=b_ub, tol=tol)
        weights = solution[:m]
    weights = np.maximum(weights, 0.0)
    weights[weights < WEIGHT_FLOOR] = 0.0
    if not np.any(weights > 0.0):
        raise InfeasibleProblemError("LP returned an all-zero combination")
    combined = _combine(normalized, weights)
    residual = abs(float(weights @ b) - 1.0)
    return AlignmentSolution(
        weights=_raw_weights(weights, norms),
        achieved_alignment=alignment(combined, y.values),
        method="lp",
        solver_residual=residual,
    )


def unweighted_sum(bank: KernelBank) -> KernelSpec:
    """Weight-one sum of the bank's raw base kernels."""
    if any(spec is None for spec in bank.base_specs):
        raise ValueError("bank lacks kernel specs; cannot build a summed kernel")
    return WeightedSum(tuple((1.0, spec) for spec in bank.base_specs))
