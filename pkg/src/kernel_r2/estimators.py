"""Estimators of the kernel integrated R^2 and the baseline dependence measures.

Both estimators of ``D(Y, X)`` share the same shape: for each sample point
``i`` a numerator ``E_i`` estimates the average conditional variance of
``k(Y, Y_i)`` given ``X`` and a denominator ``V_i`` its marginal variance;
``D_hat = 1 - mean_i(E_i / V_i)``.

* :func:`d_knn` replaces the conditional copy of ``Y_j`` by the responses of
  the K nearest neighbours of ``X_j`` (with ``X_i`` removed from the pool).
* :func:`d_rkhs` evaluates the conditional moments through a ridge-regularised
  conditional mean embedding.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from ._accel import NUMBA_ENABLED, jit
from .errors import (DegenerateVariance, DimensionMismatch, GuardExceeded,
                     InsufficientPoints, NotScalar)
from .kernels import (BROWNIAN, GAUSSIAN, REAL, ROTATION, SO3, KernelSpec,
                      as_points, brownian, gaussian, gaussian_median, gram_matrix, so3)
from .linalg import center_gram, hadamard, ridge_solve
from .neighbours import (GEODESIC, METRIC_CODES, distance_matrix, flatten_points,
                         in_degree_diagnostic, neighbour_table, tie_priorities)

DEFAULT_K = 5
DEFAULT_EPSILON = 1e-4
DEFAULT_FLOOR = 1e-12
NAIVE_GUARD = 500


@dataclass(frozen=True)
class SampleSet:
    """Paired observations; ``x``/``y`` are ``(n, d)`` reals or ``(n, 3, 3)`` rotations."""
    x: np.ndarray
    y: np.ndarray
    x_kind: str = REAL
    y_kind: str = REAL

    def __post_init__(self):
        x = as_points(self.x, self.x_kind)
        y = as_points(self.y, self.y_kind)
        if len(x) != len(y):
            raise DimensionMismatch(f"x has {len(x)} rows but y has {len(y)}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return len(self.x)

    def permute_x(self, perm):
        return replace(self, x=self.x[np.asarray(perm)])

    def take(self, index):
        index = np.asarray(index)
        return replace(self, x=self.x[index], y=self.y[index])


@dataclass
class EstimatorResult:
    d_hat: float
    d_hat_clamped: float
    numerators: np.ndarray
    denominators: np.ndarray
    dropped_indices: np.ndarray
    method: str
    params: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self):
        return len(self.numerators)

    @property
    def n_retained(self):
        return self.n - len(self.dropped_indices)

    def to_dict(self, per_index=True):
        out = {
            "method": self.method,
            "d_hat": float(self.d_hat),
            "d_hat_clamped": float(self.d_hat_clamped),
            "n": self.n,
            "n_retained": self.n_retained,
            "dropped_indices": [int(i) for i in self.dropped_indices],
            "params": self.params,
            "diagnostics": self.diagnostics,
        }
        if per_index:
            out["numerators"] = [float(v) for v in self.numerators]
            out["denominators"] = [float(v) for v in self.denominators]
        return out


def _clamp(v):
    return min(1.0, max(0.0, float(v)))


def _finish(num, den, floor, strict, method, params, diagnostics=None):
    keep = den > floor
    dropped = np.flatnonzero(~keep)
    if not keep.any():
        raise DegenerateVariance(f"all {len(den)} marginal variances are <= {floor:g}")
    if strict and dropped.size:
        raise DegenerateVariance(f"{dropped.size} marginal variances are <= {floor:g} "
                                 f"(first index {dropped[0]})")
    d_hat = 1.0 - float(np.mean(num[keep] / den[keep]))
    return EstimatorResult(d_hat, _clamp(d_hat), num, den, dropped, method,
                           dict(params), dict(diagnostics or {}))


def _finish_eta(num, den, floor, method, params):
    total = float(np.sum(den))
    if not total > floor:
        raise DegenerateVariance(f"summed marginal variance {total:.3g} <= {floor:g}")
    eta = 1.0 - float(np.sum(num)) / total
    return EstimatorResult(eta, _clamp(eta), num, den, np.empty(0, dtype=np.int64),
                           method, dict(params))


def _metric_code(metric_x, sample):
    if metric_x is None:
        return GEODESIC if sample.x_kind == ROTATION else METRIC_CODES["euclidean"]
    return METRIC_CODES[metric_x] if isinstance(metric_x, str) else int(metric_x)


def _leave_one_out_variance(gram):
    """Row-wise variance of ``gram[i, j]`` over ``j != i`` (1/(n-1) normalisation)."""
    n = gram.shape[0]
    off = ~np.eye(n, dtype=bool)
    vals = gram[off].reshape(n, n - 1)
    return vals.var(axis=1)


# --------------------------------------------------------------------------
# K-NN estimator

@jit
def _knn_numerators_jit(gram, nbrs, k):
    n = gram.shape[0]
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for j in range(n):
            if j == i:
                continue
            lji = gram[i, j]
            s = 0.0
            hit = False
            for m in range(k):
                c = nbrs[j, m]
                if c == i:
                    hit = True
                else:
                    d = lji - gram[i, c]
                    s += d * d
            if hit:
                d = lji - gram[i, nbrs[j, k]]
                s += d * d
            acc += s
        out[i] = acc
    return out


def _knn_numerators_numpy(gram, nbrs, k):
    n = gram.shape[0]
    head = nbrs[:, :k]
    spare = nbrs[:, k]
    out = np.empty(n)
    for i in range(n):
        row = gram[i]
        hit = head == i
        sq = np.where(hit, 0.0, (row[:, None] - row[head]) ** 2).sum(axis=1)
        rows = hit.any(axis=1)
        sq[rows] += (row[rows] - row[spare[rows]]) ** 2
        sq[i] = 0.0
        out[i] = sq.sum()
    return out


def knn_numerators(gram, nbrs, k):
    """Unnormalised ``sum_{j != i} sum_{c in N_j minus i} (L[j, i] - L[c, i])**2``.

    ``nbrs`` holds the K + 1 nearest neighbours of every point: dropping ``i``
    from row ``j`` (or, if ``i`` is absent, dropping the last entry) yields the
    K nearest neighbours of ``X_j`` once ``X_i`` is removed from the pool.
    """
    if NUMBA_ENABLED:
        return _knn_numerators_jit(gram, nbrs, k)
    return _knn_numerators_numpy(gram, nbrs, k)


def _check_knn(sample, k):
    if k < 1:
        raise ValueError("K must be at least 1")
    if sample.n < k + 2:
        raise InsufficientPoints(f"K-NN estimator needs n >= K + 2 = {k + 2}, got n = {sample.n}")


def _knn_moments(sample, kernel_y, metric_x, k, seed):
    _check_knn(sample, k)
    n = sample.n
    gram = gram_matrix(kernel_y, sample.y)
    code = _metric_code(metric_x, sample)
    table = neighbour_table(sample.x, k + 1, seed, metric=code, kind=sample.x_kind)
    num = knn_numerators(gram, table.indices, k) / (2.0 * k * (n - 1))
    den = _leave_one_out_variance(gram)
    return num, den, table


def _knn_params(kernel_y, metric_x, k, seed, floor):
    return {"K": int(k), "seed": int(seed), "kernel_y": kernel_y.to_dict(),
            "metric_x": metric_x if isinstance(metric_x, str) else None,
            "denominator_floor": floor}


def d_knn(sample, kernel_y, metric_x=None, k=DEFAULT_K, seed=0,
          denominator_floor=DEFAULT_FLOOR, strict=False):
    """Nearest-neighbour estimate of ``D(Y, X)``.

    Parameters
    ----------
    sample : SampleSet
    kernel_y : KernelSpec
        Kernel on the response space.
    metric_x : {"euclidean", "geodesic"}, optional
        Metric on the predictor space; inferred from ``sample.x_kind``.
    k : int
        Number of neighbours.
    seed : int
        Seed of the tie-breaking priorities.
    denominator_floor : float
        Indices whose marginal variance is at most this are dropped and listed
        in ``dropped_indices`` (``strict=True`` raises instead).
    """
    num, den, table = _knn_moments(sample, kernel_y, metric_x, k, seed)
    # in-degree of the plain K-NN graph (first K columns exclude only the center)
    trimmed = type(table)(table.indices[:, :k], k, table.seed)
    diag = in_degree_diagnostic(trimmed, sample.n)
    return _finish(num, den, denominator_floor, strict, "knn",
                   _knn_params(kernel_y, metric_x, k, seed, denominator_floor), diag)


def d_knn_naive(sample, kernel_y, metric_x=None, k=DEFAULT_K, seed=0,
                denominator_floor=DEFAULT_FLOOR, strict=False):
    """Brute-force reference for :func:`d_knn`: one full neighbour sort per (i, j) pair."""
    n = sample.n
    if n > NAIVE_GUARD:
        raise GuardExceeded(f"naive estimator limited to n <= {NAIVE_GUARD}, got {n}")
    _check_knn(sample, k)
    gram = gram_matrix(kernel_y, sample.y)
    flat = flatten_points(sample.x, sample.x_kind)
    dist = distance_matrix(flat, _metric_code(metric_x, sample))
    prio = tie_priorities(seed, np.arange(n), np.arange(n))
    num = np.zeros(n)
    den = np.zeros(n)
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            d = dist[j].copy()
            d[[i, j]] = np.inf
            nbrs = np.lexsort((prio[j], d))[:k]
            num[i] += np.sum((gram[j, i] - gram[nbrs, i]) ** 2)
        others = np.delete(gram[:, i], i)
        den[i] = np.mean(others ** 2) - np.mean(others) ** 2
    num /= 2.0 * k * (n - 1)
    return _finish(num, den, denominator_floor, strict, "knn-naive",
                   _knn_params(kernel_y, metric_x, k, seed, denominator_floor))


# --------------------------------------------------------------------------
# RKHS estimator

def _rkhs_moments(sample, kernel_x, kernel_y, epsilon):
    n = sample.n
    if n < 3:
        raise InsufficientPoints(f"RKHS estimator needs n >= 3, got {n}")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    kx = gram_matrix(kernel_x, sample.x)
    ky = gram_matrix(kernel_y, sample.y)
    kx_c = center_gram(kx)
    # W = (Kc + n eps I)^-1 Kc; since the two factors commute, Kc (Kc + n eps I)^-1 = W.T
    w = ridge_solve(kx_c, n * epsilon, kx_c)
    m = ky @ w.T
    ones = np.ones(n)
    ky_sq = hadamard(ky, ky)
    ky_row = ky @ ones
    sq_row = ky_sq @ ones
    den = sq_row / n - (ky_row / n) ** 2
    # the numerator shares its first and third terms with the denominator
    smoothed = ky_sq @ (w.T @ ones)
    m_row = m @ ones
    mm_diag = np.einsum("ij,ij->i", m, m)
    num = den + (smoothed - 2.0 * ky_row * m_row / n - mm_diag) / n
    return num, den


def d_rkhs(sample, kernel_x, kernel_y, epsilon=DEFAULT_EPSILON,
           denominator_floor=DEFAULT_FLOOR, strict=False):
    """Conditional-mean-embedding estimate of ``D(Y, X)`` with ridge ``n * epsilon``."""
    num, den = _rkhs_moments(sample, kernel_x, kernel_y, epsilon)
    params = {"epsilon": float(epsilon), "kernel_x": kernel_x.to_dict(),
              "kernel_y": kernel_y.to_dict(), "denominator_floor": denominator_floor}
    return _finish(num, den, denominator_floor, strict, "rkhs", params)


# --------------------------------------------------------------------------
# baselines

def xi_n(sample, seed=0):
    """Chatterjee's rank correlation of Y on X.

    Ties in X are broken by seeded random priorities; ties in Y use the
    ``l_i (n - l_i)`` normaliser, which equals ``(n^2 - 1) / 3`` per point on
    average when Y has no ties.
    """
    if sample.x_kind != REAL or sample.y_kind != REAL or sample.x.shape[1] != 1 \
            or sample.y.shape[1] != 1:
        raise NotScalar("xi_n needs scalar X and Y")
    x = sample.x[:, 0]
    y = sample.y[:, 0]
    n = len(x)
    if n < 2:
        raise InsufficientPoints("xi_n needs at least two points")
    prio = tie_priorities(seed, [-2], np.arange(n))[0]
    ys = y[np.lexsort((prio, x))]
    sorted_y = np.sort(y)
    r = np.searchsorted(sorted_y, ys, side="right")
    l = n - np.searchsorted(sorted_y, ys, side="left")
    denom = 2.0 * np.sum(l * (n - l).astype(float))
    if denom == 0:
        raise DegenerateVariance("Y is constant")
    return 1.0 - n * float(np.abs(np.diff(r)).sum()) / denom


def eta_knn(sample, kernel_y, metric_x=None, k=DEFAULT_K, seed=0,
            denominator_floor=DEFAULT_FLOOR):
    """Globally normalised variant: ``1 - sum_i E_i / sum_i V_i`` with the K-NN moments."""
    num, den, _ = _knn_moments(sample, kernel_y, metric_x, k, seed)
    return _finish_eta(num, den, denominator_floor, "eta-knn",
                       _knn_params(kernel_y, metric_x, k, seed, denominator_floor))


def eta_rkhs(sample, kernel_x, kernel_y, epsilon=DEFAULT_EPSILON,
             denominator_floor=DEFAULT_FLOOR):
    num, den = _rkhs_moments(sample, kernel_x, kernel_y, epsilon)
    params = {"epsilon": float(epsilon), "kernel_x": kernel_x.to_dict(),
              "kernel_y": kernel_y.to_dict(), "denominator_floor": denominator_floor}
    return _finish_eta(num, den, denominator_floor, "eta-rkhs", params)


# --------------------------------------------------------------------------
# kernel resolution and statistic factories

def resolve_kernel(name, points, kind=REAL, bandwidth="median"):
    """Build a KernelSpec for ``points``; ``bandwidth="median"`` applies the median heuristic."""
    if name is None:
        name = SO3 if kind == ROTATION else GAUSSIAN
    if name == SO3:
        if kind != ROTATION:
            raise ValueError("so3 kernel needs rotation-valued points")
        return so3()
    if kind == ROTATION:
        raise ValueError(f"{name} kernel needs real-valued points")
    dim = as_points(points).shape[1]
    if name == BROWNIAN:
        return brownian(dim)
    if name == GAUSSIAN:
        if bandwidth in (None, "median"):
            return gaussian_median(points)
        return gaussian(float(bandwidth), dim)
    raise ValueError(f"unknown kernel {name!r}")


METHODS = ("knn", "rkhs", "xi", "eta-knn", "eta-rkhs")


def estimate(sample, method="knn", kernel_x=None, kernel_y=None, bandwidth="median",
             k=DEFAULT_K, epsilon=DEFAULT_EPSILON, seed=0,
             denominator_floor=DEFAULT_FLOOR):
    """Run one of :data:`METHODS` with kernels resolved from names.

    Returns an EstimatorResult, or a float for ``"xi"``.
    """
    if method == "xi":
        return xi_n(sample, seed)
    ky = kernel_y if isinstance(kernel_y, KernelSpec) else \
        resolve_kernel(kernel_y, sample.y, sample.y_kind, bandwidth)
    if method == "knn":
        return d_knn(sample, ky, None, k, seed, denominator_floor)
    if method == "eta-knn":
        return eta_knn(sample, ky, None, k, seed, denominator_floor)
    kx = kernel_x if isinstance(kernel_x, KernelSpec) else \
        resolve_kernel(kernel_x, sample.x, sample.x_kind, bandwidth)
    if method == "rkhs":
        return d_rkhs(sample, kx, ky, epsilon, denominator_floor)
    if method == "eta-rkhs":
        return eta_rkhs(sample, kx, ky, epsilon, denominator_floor)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def make_statistic(method="knn", **options):
    """Scalar statistic ``SampleSet -> float`` (raw estimate) for permutation tests."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")

    def statistic(sample):
        out = estimate(sample, method, **options)
        return float(out) if method == "xi" else out.d_hat

    statistic.method = method
    return statistic
