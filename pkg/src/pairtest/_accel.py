"""Kernel backend selection.

The numeric kernels in :mod:`pairtest._kernels` are compiled with numba
when it is importable.  Set ``PAIRTEST_BACKEND=python`` (or
``PAIRTEST_NO_NUMBA=1``) to force the pure numpy/Python fallback;
``PAIRTEST_BACKEND=numba`` insists on the JIT and raises if numba is
missing.  Both backends execute the same source, so results are
identical either way.
"""

import os

__all__ = ["njit", "HAS_NUMBA", "backend"]


def _noop_njit(*args, **kwargs):
    if args and callable(args[0]):
        return args[0]

    def wrap(func):
        return func

    return wrap


def _pick():
    choice = os.environ.get("PAIRTEST_BACKEND", "").strip().lower()
    if not choice and os.environ.get("PAIRTEST_NO_NUMBA", "0") not in ("", "0"):
        choice = "python"
    if choice in ("python", "numpy"):
        return _noop_njit, False
    try:
        from numba import njit as numba_njit
    except ImportError:
        if choice in ("numba", "jit"):
            raise
        return _noop_njit, False
    return numba_njit, True


njit, HAS_NUMBA = _pick()


def backend() -> str:
    """Name of the active kernel backend, ``"numba"`` or ``"python"``."""
    return "numba" if HAS_NUMBA else "python"
