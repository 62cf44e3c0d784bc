"""Target-neighbor graphs for the margin and embedding learners.

``lmnn`` mode marks, for each point, its k nearest same-class points
(directional, 0/1 rows).  ``dne`` mode additionally finds the k nearest
differently-labeled points and symmetrizes with the or-rule: +1 if either
endpoint names the other as a same-class neighbor, -1 likewise for
different-class neighbors, 0 otherwise.  Distance ties break toward the
lower index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = ["NeighborGraph", "build_neighbor_graph", "euclidean_distances"]


@dataclass(frozen=True)
class NeighborGraph:
    """Pairwise neighbor weights plus the label-match indicator."""

    w: np.ndarray  # lmnn: 0/1 directional; dne: symmetric +1/-1/0
    y_match: np.ndarray  # bool, y_i == y_j
    k: int
    mode: str


def euclidean_distances(x: np.ndarray) -> np.ndarray:
    sq = (x * x).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    return np.sqrt(np.maximum(d2, 0.0))


def _nearest(
    dist_row: np.ndarray, candidates: np.ndarray, k: int
) -> np.ndarray:
    """Indices of the k smallest distances among candidates, ties to lower index."""
    if candidates.size == 0:
        return candidates
    order = np.argsort(dist_row[candidates], kind="stable")
    return candidates[order[: min(k, candidates.size)]]


def build_neighbor_graph(
    x: np.ndarray,
    labels: np.ndarray,
    k: int,
    mode: str,
    metric: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> NeighborGraph:
    """Construct the neighbor graph from pairwise distances on ``x``.

    ``metric`` maps the point matrix to an n x n distance matrix; the
    default is Euclidean distance on ``x`` itself.  Passing raw input
    features as ``x`` (or a custom metric) lets callers pick neighbors in
    the input space while the learner itself runs on other coordinates.
    Classes with fewer than k+1 members contribute all their available
    neighbors.
    """
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    if not 1 <= k < n:
        raise ValueError(f"k must be in [1, n); got k={k}, n={n}")
    if mode not in ("lmnn", "dne"):
        raise ValueError(f"unknown neighbor mode: {mode!r}")
    dist = metric(x) if metric is not None else euclidean_distances(x)
    if dist.shape != (n, n):
        raise ValueError("metric must return an n x n distance matrix")

    w = np.zeros((n, n), dtype=np.float64)
    indices = np.arange(n)
    for i in range(n):
        same = indices[(labels == labels[i]) & (indices != i)]
        for j in _nearest(dist[i], same, k):
            w[i, j] = 1.0
    if mode == "dne":
        w = np.maximum(w, w.T)  # j in NeigI(i) or i in NeigI(j)
        ext = np.zeros((n, n), dtype=np.float64)
        for i in range(n):
            diff = indices[labels != labels[i]]
            for j in _nearest(dist[i], diff, k):
                ext[i, j] = 1.0
        ext = np.maximum(ext, ext.T)
        w = w - ext  # same/different neighbor sets are label-disjoint
    y_match = labels[:, None] == labels[None, :]
    return NeighborGraph(w=w, y_match=y_match, k=k, mode=mode)
