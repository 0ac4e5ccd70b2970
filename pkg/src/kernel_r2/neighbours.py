"""Exact K-nearest-neighbour search in a metric space.

Neighbours are ordered by ``(distance, priority)`` where the priority of
candidate ``k`` seen from center ``j`` is a 64-bit hash of ``(seed, j, k)``.
Equidistant candidates are therefore ordered uniformly at random, yet every
query is reproducible from the seed alone, regardless of traversal order or
thread count.

The tree stores one point per node in an implicit layout: the node that owns
positions ``[lo, end[lo])`` of ``order`` keeps its vantage point at ``lo``,
the inner ball in ``[lo + 1, split[lo])`` and the outer shell in
``[split[lo], end[lo])``.
"""
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from ._accel import NUMBA_ENABLED, jit
from .errors import EmptySample, InsufficientPoints
from .kernels import REAL, ROTATION, as_points

EUCLIDEAN = 0
GEODESIC = 1
METRIC_CODES = {"euclidean": EUCLIDEAN, "geodesic": GEODESIC}

_MASK = (1 << 64) - 1
_INC = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
# priority key used for queries that come from outside the sample
EXTERNAL_CENTER = -1


# --------------------------------------------------------------------------
# tie-break priorities (splitmix64 finaliser)

if NUMBA_ENABLED:
    @jit
    def _mix(x):
        z = x + np.uint64(_INC)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
        return z ^ (z >> np.uint64(31))

    @jit
    def _priority(seed, center, cand):
        h = _mix(np.uint64(seed) ^ _mix(np.uint64(center + 1)))
        return _mix(h ^ np.uint64(cand))
else:
    def _mix(x):
        z = (int(x) + _INC) & _MASK
        z = ((z ^ (z >> 30)) * _M1) & _MASK
        z = ((z ^ (z >> 27)) * _M2) & _MASK
        return z ^ (z >> 31)

    def _priority(seed, center, cand):
        h = _mix(int(seed) ^ _mix(int(center) + 1))
        return _mix(h ^ int(cand))


def _mix_array(x):
    with np.errstate(over="ignore"):
        z = x + np.uint64(_INC)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def tie_priorities(seed, centers, candidates):
    """Priority matrix ``P[a, b]`` for ``centers[a]`` and ``candidates[b]``."""
    seed = np.uint64(int(seed) & _MASK)
    centers = np.asarray(centers, dtype=np.int64)
    candidates = np.asarray(candidates, dtype=np.int64)
    with np.errstate(over="ignore"):
        h = _mix_array(seed ^ _mix_array((centers + 1).astype(np.uint64)))
    return _mix_array(h[:, None] ^ candidates.astype(np.uint64)[None, :])


def _seed64(seed):
    # jitted code takes the seed as a uint64 scalar
    return np.uint64(int(seed) & _MASK) if NUMBA_ENABLED else int(seed) & _MASK


# --------------------------------------------------------------------------
# metric

@jit
def _dist(x, a, q, metric):
    if metric == 0:
        s = 0.0
        for t in range(x.shape[1]):
            diff = x[a, t] - q[t]
            s += diff * diff
        return np.sqrt(s)
    s = 0.0
    for t in range(x.shape[1]):
        s += x[a, t] * q[t]
    c = (s - 1.0) / 2.0
    if c > 1.0:
        c = 1.0
    elif c < -1.0:
        c = -1.0
    return np.arccos(c)


def flatten_points(points, kind=REAL):
    """Contiguous ``(n, m)`` float64 layout used by the tree (rotations become 9-vectors)."""
    pts = as_points(points, kind)
    if len(pts) == 0:
        raise EmptySample("no points given")
    return np.ascontiguousarray(pts.reshape(len(pts), -1), dtype=np.float64)


def distance_matrix(flat, metric):
    """Dense pairwise distances for the brute-force paths."""
    if metric == GEODESIC:
        cos = np.clip((flat @ flat.T - 1.0) / 2.0, -1.0, 1.0)
        return np.arccos(cos)
    return cdist(flat, flat)


# --------------------------------------------------------------------------
# tree construction and queries

@jit
def _build(x, metric, seed, order, end, split, inner_max, outer_min):
    n = x.shape[0]
    prio = np.empty(n, dtype=np.uint64)
    for i in range(n):
        prio[i] = _priority(seed, -2, i)
    stack = np.empty(2 * n + 2, dtype=np.int64)
    top = 0
    stack[top] = 0
    stack[top + 1] = n
    top += 2
    while top > 0:
        top -= 2
        lo = stack[top]
        hi = stack[top + 1]
        if hi <= lo:
            continue
        best = lo
        for t in range(lo + 1, hi):
            if prio[order[t]] < prio[order[best]]:
                best = t
        tmp = order[lo]
        order[lo] = order[best]
        order[best] = tmp
        end[lo] = hi
        cnt = hi - lo - 1
        if cnt == 0:
            split[lo] = hi
            inner_max[lo] = -1.0
            outer_min[lo] = np.inf
            continue
        v = order[lo]
        d = np.empty(cnt)
        for t in range(cnt):
            d[t] = _dist(x, order[lo + 1 + t], x[v], metric)
        idx = np.argsort(d, kind="mergesort")
        seg = order[lo + 1:hi].copy()
        for t in range(cnt):
            order[lo + 1 + t] = seg[idx[t]]
        m = (cnt + 1) // 2
        split[lo] = lo + 1 + m
        inner_max[lo] = d[idx[m - 1]]
        outer_min[lo] = d[idx[m]] if m < cnt else np.inf
        stack[top] = lo + 1
        stack[top + 1] = lo + 1 + m
        top += 2
        stack[top] = lo + 1 + m
        stack[top + 1] = hi
        top += 2


@jit
def _query(x, metric, order, end, split, inner_max, outer_min,
           q, center, exclude, k, seed, out_idx, out_dist):
    """k nearest to ``q`` ordered by (distance, priority); returns how many were found."""
    best_d = np.full(k, np.inf)
    best_p = np.zeros(k, dtype=np.uint64)
    best_i = np.full(k, -1, dtype=np.int64)
    count = 0
    n = order.shape[0]
    stack_node = np.empty(2 * n + 2, dtype=np.int64)
    stack_lb = np.empty(2 * n + 2)
    top = 0
    stack_node[0] = 0
    stack_lb[0] = 0.0
    top = 1
    while top > 0:
        top -= 1
        lo = stack_node[top]
        lb = stack_lb[top]
        if count == k and lb > best_d[k - 1] * (1.0 + 1e-10) + 1e-12:
            continue
        v = order[lo]
        dv = _dist(x, v, q, metric)
        skip = v == center
        for e in range(exclude.shape[0]):
            if exclude[e] == v:
                skip = True
        if not skip:
            pv = _priority(seed, center, v)
            if count < k or dv < best_d[k - 1] or (dv == best_d[k - 1] and pv < best_p[k - 1]):
                pos = count if count < k else k - 1
                while pos > 0 and (best_d[pos - 1] > dv
                                   or (best_d[pos - 1] == dv and best_p[pos - 1] > pv)):
                    if pos < k:
                        best_d[pos] = best_d[pos - 1]
                        best_p[pos] = best_p[pos - 1]
                        best_i[pos] = best_i[pos - 1]
                    pos -= 1
                best_d[pos] = dv
                best_p[pos] = pv
                best_i[pos] = v
                if count < k:
                    count += 1
        s = split[lo]
        hi = end[lo]
        in_lb = dv - inner_max[lo]
        if in_lb < 0.0:
            in_lb = 0.0
        out_lb = outer_min[lo] - dv
        if out_lb < 0.0:
            out_lb = 0.0
        has_in = s > lo + 1
        has_out = hi > s
        # push the farther side first so the nearer one is explored first
        if in_lb <= out_lb:
            if has_out:
                stack_node[top] = s
                stack_lb[top] = out_lb
                top += 1
            if has_in:
                stack_node[top] = lo + 1
                stack_lb[top] = in_lb
                top += 1
        else:
            if has_in:
                stack_node[top] = lo + 1
                stack_lb[top] = in_lb
                top += 1
            if has_out:
                stack_node[top] = s
                stack_lb[top] = out_lb
                top += 1
    for t in range(count):
        out_idx[t] = best_i[t]
        out_dist[t] = best_d[t]
    return count


@jit
def _table(x, metric, order, end, split, inner_max, outer_min, k, seed):
    n = x.shape[0]
    out = np.empty((n, k), dtype=np.int64)
    dist = np.empty(k)
    row = np.empty(k, dtype=np.int64)
    none = np.empty(0, dtype=np.int64)
    for j in range(n):
        _query(x, metric, order, end, split, inner_max, outer_min,
               x[j], j, none, k, seed, row, dist)
        for t in range(k):
            out[j, t] = row[t]
    return out


@dataclass(frozen=True)
class VpTree:
    points: np.ndarray  # (n, m) flattened
    metric: int
    seed: int
    order: np.ndarray
    end: np.ndarray
    split: np.ndarray
    inner_max: np.ndarray
    outer_min: np.ndarray

    @property
    def n(self):
        return self.points.shape[0]

    def query(self, point, k, tie_seed=0, exclude=()):
        """k nearest sample indices to an arbitrary point (not necessarily in the sample)."""
        q = np.ascontiguousarray(np.asarray(point, dtype=np.float64).reshape(-1))
        if q.shape[0] != self.points.shape[1]:
            raise ValueError("query point has the wrong dimension")
        ex = np.asarray(sorted(set(int(e) for e in exclude)), dtype=np.int64)
        return self._run(q, EXTERNAL_CENTER, ex, k, tie_seed)

    def _run(self, q, center, ex, k, tie_seed):
        available = self.n - len(set(ex.tolist()) | ({center} if center >= 0 else set()))
        if k > available:
            raise InsufficientPoints(f"asked for {k} neighbours but only {available} candidates remain")
        idx = np.empty(k, dtype=np.int64)
        dist = np.empty(k)
        found = _query(self.points, self.metric, self.order, self.end, self.split,
                       self.inner_max, self.outer_min, q, center, ex, k,
                       _seed64(tie_seed), idx, dist)
        return idx[:found]


def build_vp_tree(points, metric="euclidean", seed=0, kind=None):
    """Build a vantage-point tree; vantage points are picked by a seeded hash."""
    code = METRIC_CODES[metric] if isinstance(metric, str) else int(metric)
    if kind is None:
        kind = ROTATION if code == GEODESIC else REAL
    flat = flatten_points(points, kind)
    n = flat.shape[0]
    if n == 0:
        raise EmptySample("cannot build a tree over zero points")
    order = np.arange(n, dtype=np.int64)
    end = np.zeros(n, dtype=np.int64)
    split = np.zeros(n, dtype=np.int64)
    inner_max = np.zeros(n)
    outer_min = np.zeros(n)
    _build(flat, code, _seed64(seed), order, end, split, inner_max, outer_min)
    return VpTree(flat, code, int(seed), order, end, split, inner_max, outer_min)


def k_nearest_excluding(tree, center, exclude, k, tie_seed):
    """The k nearest neighbours of sample point ``center`` among the non-excluded points."""
    ex = np.asarray(sorted(set(int(e) for e in exclude) - {int(center)}), dtype=np.int64)
    return tree._run(tree.points[int(center)], int(center), ex, int(k), tie_seed)


# --------------------------------------------------------------------------
# neighbour tables

@dataclass(frozen=True)
class NeighbourTable:
    """Row ``j`` lists the k nearest neighbours of point ``j`` (excluding ``j``)."""
    indices: np.ndarray
    k: int
    seed: int

    @property
    def n_centers(self):
        return self.indices.shape[0]


def neighbour_table_bruteforce(flat, metric, k, seed):
    """Numpy reference: full ``(distance, priority)`` sort of every row."""
    n = flat.shape[0]
    d = distance_matrix(flat, metric)
    np.fill_diagonal(d, np.inf)
    prio = tie_priorities(seed, np.arange(n), np.arange(n))
    order = np.lexsort((prio, d), axis=-1)
    return np.ascontiguousarray(order[:, :k])


def neighbour_table(points, k, seed, metric="euclidean", kind=None, tree=None):
    """K-NN lists for every sample point; uses the tree under numba, brute force otherwise."""
    code = METRIC_CODES[metric] if isinstance(metric, str) else int(metric)
    if tree is None:
        if kind is None:
            kind = ROTATION if code == GEODESIC else REAL
        flat = flatten_points(points, kind)
    else:
        flat = tree.points
    n = flat.shape[0]
    if k > n - 1:
        raise InsufficientPoints(f"asked for {k} neighbours among {n - 1} candidates")
    if not NUMBA_ENABLED:
        return NeighbourTable(neighbour_table_bruteforce(flat, code, k, seed), int(k), int(seed))
    if tree is None:
        tree = build_vp_tree(flat, code, seed, kind=REAL)
    idx = _table(tree.points, tree.metric, tree.order, tree.end, tree.split,
                 tree.inner_max, tree.outer_min, int(k), _seed64(seed))
    return NeighbourTable(idx, int(k), int(seed))


def knn_in_degrees(table, n):
    """delta[l] = number of centers whose neighbour list contains l."""
    return np.bincount(np.asarray(table.indices).ravel(), minlength=n)


def in_degree_diagnostic(table, n, warn_factor=10.0):
    """Max in-degree relative to K; warns when it exceeds ``warn_factor * K``."""
    deg = knn_in_degrees(table, n)
    max_deg = int(deg.max()) if deg.size else 0
    if max_deg > warn_factor * table.k:
        warnings.warn(f"max K-NN in-degree {max_deg} exceeds {warn_factor:g} * K = "
                      f"{warn_factor * table.k:g}", RuntimeWarning, stacklevel=2)
    return {"max_in_degree": max_deg, "max_in_degree_over_k": max_deg / table.k}
