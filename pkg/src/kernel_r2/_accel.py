"""Numba switch for the hot loops.

Set ``KERNEL_R2_DISABLE_NUMBA=1`` before import to run every kernel as plain
Python/numpy. The numba path and the fallback compute the same quantities;
``benchmarks/bench_accel.py`` compares their speed.
"""
import os

_FLAG = "KERNEL_R2_DISABLE_NUMBA"

NUMBA_ENABLED = os.environ.get(_FLAG, "").strip().lower() not in {"1", "true", "yes"}

if NUMBA_ENABLED:
    try:
        import numba
    except ImportError:  # pragma: no cover
        NUMBA_ENABLED = False


def jit(func=None, **options):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""
    def wrap(f):
        if not NUMBA_ENABLED:
            return f
        options.setdefault("cache", True)
        return numba.njit(**options)(f)

    if func is not None:
        return wrap(func)
    return wrap
