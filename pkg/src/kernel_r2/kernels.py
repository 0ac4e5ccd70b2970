"""Kernel evaluation, median-heuristic bandwidths and Gram matrices.

Three kernel families are supported:

* ``gaussian``: ``exp(-d**2 / (2 * bandwidth**2))`` on real vectors, ``d`` Euclidean.
* ``brownian``: ``|a| + |b| - |a - b|`` on real vectors (Euclidean norms for d > 1).
* ``so3``: ``pi * t * (pi - t) / (8 * sin t)`` on rotation matrices, with ``t`` the
  geodesic angle between the two rotations.

Real-valued samples are stored as ``(n, d)`` float arrays and rotations as
``(n, 3, 3)`` arrays.
"""
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import DegenerateSample, DimensionMismatch, InvalidRotation

GAUSSIAN = "gaussian"
BROWNIAN = "brownian"
SO3 = "so3"
FAMILIES = (GAUSSIAN, BROWNIAN, SO3)

REAL = "real"
ROTATION = "rotation"

ROTATION_TOL = 1e-9
# below this distance from 0 or pi the SO(3) kernel takes its limit value
SO3_SINGULAR_TOL = 1e-7
SO3_LIMIT = np.pi ** 2 / 8


@dataclass(frozen=True)
class KernelSpec:
    family: str
    bandwidth: Optional[float] = None
    input_kind: str = REAL
    dim: Optional[int] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.input_kind not in (REAL, ROTATION):
            raise ValueError(f"unknown input kind {self.input_kind!r}")
        if self.family == GAUSSIAN:
            if self.bandwidth is None or not np.isfinite(self.bandwidth) or self.bandwidth <= 0:
                raise ValueError("gaussian kernel needs a finite bandwidth > 0")
        if self.family == SO3 and self.input_kind != ROTATION:
            raise ValueError("so3 kernel requires rotation inputs")
        if self.family != SO3 and self.input_kind == ROTATION:
            raise ValueError(f"{self.family} kernel requires real-vector inputs")

    @property
    def bounded(self):
        return self.family != BROWNIAN

    def to_dict(self):
        return {"family": self.family, "bandwidth": self.bandwidth,
                "input_kind": self.input_kind, "dim": self.dim}


def gaussian(bandwidth, dim=None):
    return KernelSpec(GAUSSIAN, float(bandwidth), REAL, dim)


def brownian(dim=None):
    return KernelSpec(BROWNIAN, None, REAL, dim)


def so3():
    return KernelSpec(SO3, None, ROTATION, None)


# --------------------------------------------------------------------------
# points

def as_points(points, kind=REAL):
    """Coerce ``points`` to the canonical array layout for ``kind``."""
    arr = np.asarray(points, dtype=float)
    if kind == ROTATION:
        if arr.ndim == 2 and arr.shape == (3, 3):
            arr = arr[None]
        elif arr.ndim == 2 and arr.shape[1] == 9:
            arr = arr.reshape(-1, 3, 3)
        if arr.ndim != 3 or arr.shape[1:] != (3, 3):
            raise DimensionMismatch(f"rotations must have shape (n, 3, 3), got {arr.shape}")
        return arr
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None]
    elif arr.ndim != 2:
        raise DimensionMismatch(f"real points must be 1-D or 2-D, got shape {arr.shape}")
    return arr


def check_rotations(rotations, tol=ROTATION_TOL):
    """Raise InvalidRotation unless every matrix is orthogonal with det +1."""
    r = np.asarray(rotations, dtype=float)
    if r.ndim == 2:
        r = r[None]
    if r.ndim != 3 or r.shape[1:] != (3, 3):
        raise InvalidRotation(f"expected 3x3 matrices, got shape {r.shape}")
    if not np.all(np.isfinite(r)):
        raise InvalidRotation("rotation has non-finite entries")
    gram = np.einsum("nki,nkj->nij", r, r)
    dev = np.abs(gram - np.eye(3)).max(axis=(1, 2))
    bad = np.flatnonzero(dev > tol)
    if bad.size:
        raise InvalidRotation(f"matrix {bad[0]} is not orthogonal (deviation {dev[bad[0]]:.3g})")
    det = np.linalg.det(r)
    bad = np.flatnonzero(np.abs(det - 1.0) > tol)
    if bad.size:
        raise InvalidRotation(f"matrix {bad[0]} has determinant {det[bad[0]]:.12g}")


# --------------------------------------------------------------------------
# SO(3)

def so3_geodesic_angle(a, b):
    """Rotation angle of ``b.T @ a``, in ``[0, pi]``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    check_rotations(a)
    check_rotations(b)
    trace = float(np.sum(a * b))  # Tr(b.T @ a)
    return float(np.arccos(np.clip((trace - 1.0) / 2.0, -1.0, 1.0)))


def so3_kernel_from_angle(theta):
    """Vectorised SO(3) kernel value for geodesic angle(s) ``theta``."""
    theta = np.asarray(theta, dtype=float)
    singular = (theta < SO3_SINGULAR_TOL) | (np.pi - theta < SO3_SINGULAR_TOL)
    safe = np.where(singular, np.pi / 2, theta)
    val = np.pi * safe * (np.pi - safe) / (8.0 * np.sin(safe))
    out = np.where(singular, SO3_LIMIT, val)
    return out if out.ndim else float(out)


def rotation_angles(rotations):
    """Pairwise geodesic angles of an ``(n, 3, 3)`` stack; exactly symmetric, zero diagonal."""
    flat = rotations.reshape(len(rotations), 9)
    cos = (flat @ flat.T - 1.0) / 2.0
    ang = np.arccos(np.clip(cos, -1.0, 1.0))
    ang = np.triu(ang, 1)
    return ang + ang.T


# --------------------------------------------------------------------------
# evaluation

def _check_point(spec, p):
    if spec.input_kind == ROTATION:
        p = np.asarray(p, dtype=float)
        if p.shape not in ((3, 3), (9,)):
            raise DimensionMismatch(f"rotation point must be 3x3, got shape {p.shape}")
        p = p.reshape(3, 3)
        check_rotations(p)
        return p
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.ndim != 1:
        raise DimensionMismatch(f"real point must be a vector, got shape {p.shape}")
    if spec.dim is not None and p.shape[0] != spec.dim:
        raise DimensionMismatch(f"expected dimension {spec.dim}, got {p.shape[0]}")
    return p


def eval_kernel(spec, a, b):
    a = _check_point(spec, a)
    b = _check_point(spec, b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"point shapes differ: {a.shape} vs {b.shape}")
    if spec.family == GAUSSIAN:
        d2 = float(np.sum((a - b) ** 2))
        return float(np.exp(d2 * (-0.5 / spec.bandwidth ** 2)))
    if spec.family == BROWNIAN:
        return float(np.linalg.norm(a) + np.linalg.norm(b) - np.linalg.norm(a - b))
    theta = float(np.arccos(np.clip((np.sum(a * b) - 1.0) / 2.0, -1.0, 1.0)))
    return so3_kernel_from_angle(theta)


def pairwise_distances(points, kind=REAL):
    """Full symmetric distance matrix: Euclidean for vectors, geodesic angle for rotations."""
    pts = as_points(points, kind)
    if kind == ROTATION:
        return rotation_angles(pts)
    if len(pts) < 2:
        return np.zeros((len(pts), len(pts)))
    return squareform(pdist(pts))


def gram_matrix(spec, points):
    """``[k(p_i, p_j)]``; symmetric by construction."""
    pts = as_points(points, spec.input_kind)
    if spec.input_kind == ROTATION:
        check_rotations(pts)
        return so3_kernel_from_angle(rotation_angles(pts))
    if spec.dim is not None and pts.shape[1] != spec.dim:
        raise DimensionMismatch(f"expected dimension {spec.dim}, got {pts.shape[1]}")
    n = len(pts)
    # kernel values are evaluated on the condensed upper triangle only
    dist = pdist(pts) if n > 1 else np.zeros(0)
    if spec.family == GAUSSIAN:
        gram = squareform(np.exp(dist ** 2 * (-0.5 / spec.bandwidth ** 2)))
        np.fill_diagonal(gram, 1.0)
        return gram
    norms = np.linalg.norm(pts, axis=1)
    gram = squareform(dist)
    np.subtract(norms[:, None] + norms[None, :], gram, out=gram)
    return gram


def cross_gram(spec, a, b):
    """Rectangular ``[k(a_i, b_j)]`` for real-vector kernels."""
    if spec.input_kind == ROTATION:
        a = as_points(a, ROTATION)
        b = as_points(b, ROTATION)
        cos = (a.reshape(-1, 9) @ b.reshape(-1, 9).T - 1.0) / 2.0
        return so3_kernel_from_angle(np.arccos(np.clip(cos, -1.0, 1.0)))
    a = as_points(a)
    b = as_points(b)
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch("point dimensions differ")
    diff = np.sqrt(np.maximum(
        (a ** 2).sum(1)[:, None] + (b ** 2).sum(1)[None, :] - 2 * a @ b.T, 0.0))
    if spec.family == GAUSSIAN:
        return np.exp(-diff ** 2 / (2.0 * spec.bandwidth ** 2))
    return np.linalg.norm(a, axis=1)[:, None] + np.linalg.norm(b, axis=1)[None, :] - diff


# --------------------------------------------------------------------------
# bandwidth

MetricLike = Union[str, Callable, None]


def median_heuristic_bandwidth(points, metric: MetricLike = None):
    """Median of the pairwise distances ``{metric(p_i, p_j) : i < j}``.

    ``metric`` may be ``"euclidean"``, ``"geodesic"`` (rotations) or any
    callable on two points. Even pair counts average the two middle values.
    """
    if metric is None or metric == "euclidean":
        pts = as_points(points)
        if len(pts) < 2:
            raise DegenerateSample("median heuristic needs at least two points")
        dists = pdist(pts)
    elif metric == "geodesic":
        pts = as_points(points, ROTATION)
        if len(pts) < 2:
            raise DegenerateSample("median heuristic needs at least two points")
        dists = rotation_angles(pts)[np.triu_indices(len(pts), 1)]
    else:
        pts = list(points)
        if len(pts) < 2:
            raise DegenerateSample("median heuristic needs at least two points")
        dists = np.array([metric(pts[i], pts[j])
                          for i in range(len(pts)) for j in range(i + 1, len(pts))], dtype=float)
    if not np.any(dists > 0):
        raise DegenerateSample("all pairwise distances are zero")
    return float(np.median(dists))


def median_bandwidth(points, kind=REAL):
    """Median heuristic usable as a Gaussian bandwidth.

    When more than half of the pairs coincide the plain median is zero; the
    median over the strictly positive distances is used instead.
    """
    metric = "geodesic" if kind == ROTATION else "euclidean"
    sigma = median_heuristic_bandwidth(points, metric)
    if sigma > 0:
        return sigma
    pts = as_points(points, kind)
    dists = pairwise_distances(pts, kind)[np.triu_indices(len(pts), 1)]
    return float(np.median(dists[dists > 0]))


def gaussian_median(points):
    """Gaussian kernel with the median-heuristic bandwidth of ``points``."""
    pts = as_points(points)
    return KernelSpec(GAUSSIAN, median_bandwidth(pts), REAL, pts.shape[1])
