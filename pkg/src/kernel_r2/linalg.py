"""Dense symmetric helpers for the RKHS estimator."""
import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import DimensionMismatch, NotPositiveDefinite

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-8


def as_symmetric(a, tol=SYMMETRY_TOL):
    """Validate a square matrix whose entries are symmetric within ``tol``."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    dev = np.abs(a - a.T).max() if a.size else 0.0
    if dev > tol:
        raise ValueError(f"matrix is not symmetric (max deviation {dev:.3g})")
    return a


def center_gram(k):
    """``H K H`` with ``H = I - 11'/n``, computed in O(n^2) by removing row/column means."""
    k = as_symmetric(k)
    row = k.mean(axis=1)
    # r_i + r_j is commutative in floating point, so the result stays exactly symmetric
    out = k - (row[:, None] + row[None, :])
    out += row.mean()
    return out


def hadamard(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return a * b


def ridge_solve(k, ridge, rhs):
    """Solve ``(K + ridge * I) x = rhs`` by Cholesky.

    If the factorisation fails, ``1e-10 * trace(K) / n`` is added to the
    diagonal once before giving up with NotPositiveDefinite.
    """
    k = as_symmetric(k, tol=1e-9)
    if not ridge > 0:
        raise ValueError("ridge must be positive")
    rhs = np.asarray(rhs, dtype=float)
    n = k.shape[0]
    if rhs.shape[0] != n:
        raise DimensionMismatch(f"rhs has {rhs.shape[0]} rows, matrix has order {n}")
    shifted = k.copy()
    shifted.flat[::n + 1] += ridge
    try:
        factor = cho_factor(shifted, lower=True, overwrite_a=True)
    except LinAlgError:
        jitter = 1e-10 * abs(np.trace(k)) / n
        shifted = k.copy()
        shifted.flat[::n + 1] += ridge + jitter
        try:
            factor = cho_factor(shifted, lower=True, overwrite_a=True)
        except LinAlgError as err:
            raise NotPositiveDefinite(
                f"K + {ridge:g} I is not positive definite even after jitter {jitter:.3g}") from err
    return cho_solve(factor, rhs)
