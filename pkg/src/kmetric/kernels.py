"""Kernel functions, Gram matrices, the ideal kernel, and the alignment score.

The workhorse is the scaled RBF ``k(x, y) = exp(-||x - y||^2 / (2 D s^2))``
where ``D`` is the raw input dimensionality of the dataset the kernel is
bound to.  Linear and polynomial kernels are included for the synthetic
nonlinearity demonstrations and for feature-map equivalence tests.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .data import Dataset

__all__ = [
    "ScaledRbf",
    "Polynomial",
    "Linear",
    "WeightedSum",
    "KernelSpec",
    "GramMatrix",
    "IdealKernel",
    "eval_kernel",
    "gram",
    "cross_gram",
    "frobenius_normalize",
    "ideal_kernel",
    "alignment",
    "format_kernel_spec",
    "parse_kernel_spec",
]


@dataclass(frozen=True)
class ScaledRbf:
    """exp(-||x - y||^2 / (2 D sigma^2)) with D the bound input dimension."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class Polynomial:
    """(x . y + offset) ** degree."""

    degree: int
    offset: float = 0.0

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be at least 1")
        if self.offset < 0:
            raise ValueError("offset must be nonnegative")


@dataclass(frozen=True)
class Linear:
    """Plain inner product."""


@dataclass(frozen=True)
class WeightedSum:
    """Nonnegative combination of base kernels; nested sums are flattened."""

    terms: tuple

    def __post_init__(self):
        flat = []
        for weight, spec in self.terms:
            weight = float(weight)
            if weight < 0:
                raise ValueError("weights must be nonnegative")
            if isinstance(spec, WeightedSum):
                flat.extend((weight * w, s) for w, s in spec.terms)
            else:
                flat.append((weight, spec))
        if not flat:
            raise ValueError("weighted sum needs at least one term")
        object.__setattr__(self, "terms", tuple(flat))


KernelSpec = Union[ScaledRbf, Polynomial, Linear, WeightedSum]


@dataclass(frozen=True)
class GramMatrix:
    """Symmetric kernel matrix over one dataset's rows, with provenance."""

    values: np.ndarray
    spec: KernelSpec
    row_points: Dataset

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("Gram matrix must be square")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class IdealKernel:
    """Label target matrix: +1 for same-class pairs, -1/(p-1) otherwise."""

    values: np.ndarray
    class_count: int


def _pairwise_sqdist(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    xn = (x * x).sum(axis=1)
    yn = (y * y).sum(axis=1)
    sq = xn[:, None] + yn[None, :] - 2.0 * (x @ y.T)
    return np.maximum(sq, 0.0)


def _eval_matrix(spec: KernelSpec, x: np.ndarray, y: np.ndarray, dim: int) -> np.ndarray:
    """Kernel values for every row pair of x (rows) against y (columns)."""
    if isinstance(spec, ScaledRbf):
        return np.exp(-_pairwise_sqdist(x, y) / (2.0 * dim * spec.sigma**2))
    if isinstance(spec, Polynomial):
        return (x @ y.T + spec.offset) ** spec.degree
    if isinstance(spec, Linear):
        return x @ y.T
    if isinstance(spec, WeightedSum):
        out = np.zeros((x.shape[0], y.shape[0]))
        for weight, sub in spec.terms:
            if weight != 0.0:
                out += weight * _eval_matrix(sub, x, y, dim)
        return out
    raise TypeError(f"unknown kernel spec: {spec!r}")


def _self_kernel(spec: KernelSpec, x: np.ndarray, dim: int) -> float:
    """k(x, x) with the zero self-distance taken exactly."""
    if isinstance(spec, ScaledRbf):
        return 1.0
    if isinstance(spec, Polynomial):
        return float((x @ x + spec.offset) ** spec.degree)
    if isinstance(spec, Linear):
        return float(x @ x)
    if isinstance(spec, WeightedSum):
        return float(sum(w * _self_kernel(spec=s, x=x, dim=dim) for w, s in spec.terms))
    raise TypeError(f"unknown kernel spec: {spec!r}")


def eval_kernel(spec: KernelSpec, x: np.ndarray, y: np.ndarray, dim: int) -> float:
    """Evaluate the kernel on a single pair of ``dim``-dimensional vectors."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[0] != dim or y.shape[0] != dim:
        raise ValueError(f"expected {dim}-dimensional inputs, got {x.shape[0]} and {y.shape[0]}")
    if x is y or np.array_equal(x, y):
        return _self_kernel(spec, x, dim)
    return float(_eval_matrix(spec, x[None, :], y[None, :], dim)[0, 0])


def gram(spec: KernelSpec, ds: Dataset) -> GramMatrix:
    """Kernel matrix of a dataset against itself, exactly symmetric.

    The upper triangle is computed and mirrored, and the diagonal is
    evaluated at exactly zero self-distance, so RBF Grams carry a unit
    diagonal bit-for-bit.
    """
    if ds.n < 1:
        raise ValueError("need at least one point")
    raw = _eval_matrix(spec, ds.features, ds.features, ds.dim)
    upper = np.triu(raw, k=1)
    values = upper + upper.T
    diag = np.array([_self_kernel(spec, row, ds.dim) for row in ds.features])
    np.fill_diagonal(values, diag)
    return GramMatrix(values=values, spec=spec, row_points=ds)


def cross_gram(spec: KernelSpec, train: Dataset, test: Dataset) -> np.ndarray:
    """Kernel values of test rows against training rows (n_test x n_train)."""
    if train.dim != test.dim:
        raise ValueError(f"dimension mismatch: train has {train.dim}, test has {test.dim}")
    return _eval_matrix(spec, test.features, train.features, train.dim)


def frobenius_normalize(k: GramMatrix) -> GramMatrix:
    """Scale a Gram matrix to unit Frobenius norm, annotating the spec."""
    norm = float(np.linalg.norm(k.values))
    if norm == 0.0:
        raise ValueError("cannot normalize a zero Gram matrix")
    return GramMatrix(
        values=k.values / norm,
        spec=WeightedSum(((1.0 / norm, k.spec),)),
        row_points=k.row_points,
    )


def ideal_kernel(labels: np.ndarray, class_count: int) -> IdealKernel:
    """Target Gram matrix the labels themselves would induce."""
    if class_count < 2:
        raise ValueError("ideal kernel needs at least two classes")
    labels = np.asarray(labels)
    same = labels[:, None] == labels[None, :]
    values = np.where(same, 1.0, -1.0 / (class_count - 1))
    return IdealKernel(values=values, class_count=class_count)


def alignment(k: np.ndarray, y: np.ndarray) -> float:
    """Normalized Frobenius inner product <K, Y>_F / (||K||_F ||Y||_F)."""
    k = np.asarray(k, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if k.shape != y.shape:
        raise ValueError("alignment arguments must have identical shape")
    nk = float(np.linalg.norm(k))
    ny = float(np.linalg.norm(y))
    if nk == 0.0 or ny == 0.0:
        raise ValueError("alignment of a zero matrix is undefined")
    return float(np.tensordot(k, y) / (nk * ny))


# ---------------------------------------------------------------------------
# textual form used by the CLI config and model artifacts
# ---------------------------------------------------------------------------


def format_kernel_spec(spec: KernelSpec) -> str:
    if isinstance(spec, ScaledRbf):
        return f"scaled-rbf(sigma={spec.sigma!r})"
    if isinstance(spec, Polynomial):
        return f"polynomial(degree={spec.degree},offset={spec.offset!r})"
    if isinstance(spec, Linear):
        return "linear"
    if isinstance(spec, WeightedSum):
        inner = ",".join(f"{w!r}*{format_kernel_spec(s)}" for w, s in spec.terms)
        return f"weighted-sum({inner})"
    raise TypeError(f"unknown kernel spec: {spec!r}")


def _split_top_level(text: str) -> list[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return [p for p in (s.strip() for s in parts) if p]


def parse_kernel_spec(text: str) -> KernelSpec:
    """Inverse of :func:`format_kernel_spec`."""
    text = text.strip()
    if text == "linear":
        return Linear()
    m = re.fullmatch(r"scaled-rbf\(\s*sigma\s*=\s*([^)]+)\)", text)
    if m:
        return ScaledRbf(sigma=float(m.group(1)))
    m = re.fullmatch(r"polynomial\(\s*degree\s*=\s*([^,)]+)(?:,\s*offset\s*=\s*([^)]+))?\)", text)
    if m:
        offset = float(m.group(2)) if m.group(2) is not None else 0.0
        return Polynomial(degree=int(m.group(1)), offset=offset)
    m = re.fullmatch(r"weighted-sum\((.*)\)", text, flags=re.DOTALL)
    if m:
        terms = []
        for part in _split_top_level(m.group(1)):
            weight_text, _, spec_text = part.partition("*")
            if not spec_text:
                raise ValueError(f"weighted-sum term needs 'weight*kernel': {part!r}")
            terms.append((float(weight_text), parse_kernel_spec(spec_text)))
        return WeightedSum(tuple(terms))
    raise ValueError(f"cannot parse kernel spec: {text!r}")
