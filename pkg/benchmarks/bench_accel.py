#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy fallbacks.

Run inside an installed environment:

    python3 benchmarks/bench_accel.py

The two hot loops are the Jacobi eigensolver sweep and the LMNN triple
scan; everything else in the package is matrix-product bound and stays in
numpy on both paths.  Results print as a small table with the speedup of
the numba path.  ``KMETRIC_NUMBA=0`` makes the whole package run on the
fallback path; this script times both explicitly regardless of the flag.
"""

import time

import numpy as np

from kmetric import _accel
from kmetric.lmnn import _loss_terms, _triple_scan_nb, _triple_scan_np
from kmetric.neighbors import build_neighbor_graph
from kmetric.numerics import sym_eig


def _time(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_jacobi(rng, sizes=(60, 120, 200)):
    rows = []
    for n in sizes:
        a = rng.normal(size=(n, n))
        a = (a + a.T) / 2.0
        sym_eig(a, use_numba=True)  # compile before timing
        t_nb = _time(lambda: sym_eig(a, use_numba=True))
        t_np = _time(lambda: sym_eig(a, use_numba=False))
        rows.append((f"jacobi eig n={n}", t_np, t_nb))
    return rows


def bench_lmnn_scan(rng, sizes=(100, 200)):
    rows = []
    for n in sizes:
        x = rng.normal(size=(n, 10))
        labels = rng.integers(0, 2, n).astype(np.int64)
        graph = build_neighbor_graph(x, labels, 3, "lmnn")
        dm = np.ascontiguousarray(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))
        pi, pj = (np.ascontiguousarray(v, dtype=np.int64) for v in np.nonzero(graph.w))

        def run(scan):
            omega = np.zeros_like(dm)
            return scan(dm, pi, pj, labels, 1.0, omega)

        run(_triple_scan_nb)  # compile
        assert np.isclose(run(_triple_scan_nb)[1], run(_triple_scan_np)[1])
        t_nb = _time(lambda: run(_triple_scan_nb))
        t_np = _time(lambda: run(_triple_scan_np))
        rows.append((f"lmnn triple scan n={n}", t_np, t_nb))
    return rows


def main():
    if not _accel.HAVE_NUMBA:
        print("numba is not importable; only the numpy path exists here")
        return
    rng = np.random.default_rng(0)
    rows = bench_jacobi(rng) + bench_lmnn_scan(rng)
    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}")
    for name, t_np, t_nb in rows:
        print(f"{name:<{width}}  {t_np:>9.4f}s  {t_nb:>9.4f}s  {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
