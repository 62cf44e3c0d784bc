"""Numba acceleration shim.

Hot numeric kernels in this package come in two interchangeable
implementations: a numba ``@njit`` version and a pure-numpy version.
Which one runs is decided once, at import time:

* if the environment variable ``KMETRIC_NUMBA`` is ``0``/``false``/``off``,
  the pure-numpy path is used;
* otherwise numba is used when it imports cleanly, with a silent fallback
  to pure numpy when it does not.

``benchmarks/bench_accel.py`` times both paths side by side.
"""

import os

__all__ = ["HAVE_NUMBA", "NUMBA_ENABLED", "njit"]


def _flag_requests_numba() -> bool:
    raw = os.environ.get("KMETRIC_NUMBA", "1").strip().lower()
    return raw not in ("0", "false", "off", "no")


try:
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _numba_njit = None
    HAVE_NUMBA = False

NUMBA_ENABLED = HAVE_NUMBA and _flag_requests_numba()


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise.

    Compiled kernels are still defined when ``KMETRIC_NUMBA=0``; the flag
    only controls which path the dispatching wrappers select, so tests can
    compare both implementations in one process.
    """
    if HAVE_NUMBA:
        return _numba_njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(func):
        return func

    return wrap
