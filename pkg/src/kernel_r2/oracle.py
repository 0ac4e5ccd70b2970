"""Exact population values for finite joint distributions.

Every expectation becomes a finite weighted sum over the alphabets, so these
functions produce ground truth for the sample estimators.
"""
import json
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePopulationVariance, ValidationError
from .estimators import SampleSet
from .kernels import REAL, as_points, gram_matrix

DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteJoint:
    x_labels: tuple
    y_points: np.ndarray
    probs: np.ndarray
    y_kind: str = REAL

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        y = as_points(self.y_points, self.y_kind)
        labels = tuple(self.x_labels)
        if probs.shape != (len(labels), len(y)):
            raise ValidationError(f"probs has shape {probs.shape}, expected "
                                  f"({len(labels)}, {len(y)})")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ValidationError("probabilities must be finite and non-negative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValidationError(f"probabilities sum to {probs.sum():.15g}, not 1")
        q = probs.sum(axis=0)
        if np.any(q <= 0):
            raise ValidationError(f"y point {int(np.argmin(q))} has zero marginal mass")
        if np.count_nonzero(q) < 2:
            raise ValidationError("Y marginal must put mass on at least two points")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "y_points", y)
        object.__setattr__(self, "x_labels", labels)

    @property
    def x_marginal(self):
        return self.probs.sum(axis=1)

    @property
    def y_marginal(self):
        return self.probs.sum(axis=0)

    def conditionals(self):
        """``(p_x, rows)`` for the x labels with positive mass; rows are P(Y | X = x)."""
        p = self.x_marginal
        keep = p > 0
        return p[keep], self.probs[keep] / p[keep, None]

    def to_dict(self):
        return {"x_labels": list(self.x_labels),
                "y_points": self.y_points.tolist() if self.y_points.shape[1] > 1
                else self.y_points[:, 0].tolist(),
                "probs": self.probs.tolist()}


def joint_from_dict(doc, y_kind=REAL):
    try:
        return DiscreteJoint(tuple(doc["x_labels"]), np.asarray(doc["y_points"], dtype=float),
                             np.asarray(doc["probs"], dtype=float), y_kind)
    except KeyError as err:
        raise ValidationError(f"joint document is missing key {err}") from err


def load_joint(path, y_kind=REAL):
    with open(path, encoding="utf-8") as fh:
        return joint_from_dict(json.load(fh), y_kind)


def product_of_marginals(joint):
    return DiscreteJoint(joint.x_labels, joint.y_points,
                         np.outer(joint.x_marginal, joint.y_marginal), joint.y_kind)


def mix_with_product(joint, weight):
    """``(1 - weight) * P + weight * (p_x q_y')``."""
    mixed = (1.0 - weight) * joint.probs + weight * np.outer(joint.x_marginal, joint.y_marginal)
    return DiscreteJoint(joint.x_labels, joint.y_points, mixed / mixed.sum(), joint.y_kind)


def _feature_moments(joint, kernel_y):
    g = gram_matrix(kernel_y, joint.y_points)
    q = joint.y_marginal
    # centred (two-pass) variances; E[k^2] - E[k]^2 cancels badly for close y points
    marg_var = q @ (g - q @ g) ** 2
    bad = np.flatnonzero(marg_var <= DEGENERATE_TOL)
    if bad.size:
        b = int(bad[0])
        raise DegeneratePopulationVariance(
            f"Var[k(Y, y)] = {marg_var[b]:.3g} at y point {b} "
            f"({joint.y_points[b].tolist()})", y=b)
    return g, q, marg_var


def population_d_discrete(joint, kernel_y):
    """``1 - sum_y P(y) E_X[Var(k(Y, y) | X)] / Var(k(Y, y))``."""
    g, q, marg_var = _feature_moments(joint, kernel_y)
    px, cond = joint.conditionals()
    cond_mean = cond @ g
    cond_var = np.einsum("ab,abc->ac", cond, (g[None, :, :] - cond_mean[:, None, :]) ** 2)
    expected_cond_var = px @ cond_var
    return float(1.0 - q @ (expected_cond_var / marg_var))


def population_d_alt_discrete(joint, kernel_y):
    """``sum_y P(y) Var_X(E[k(Y, y) | X]) / Var(k(Y, y))`` (variance of conditional means)."""
    g, q, marg_var = _feature_moments(joint, kernel_y)
    px, cond = joint.conditionals()
    cond_mean = cond @ g
    grand = px @ cond_mean
    var_of_means = px @ (cond_mean - grand) ** 2
    return float(q @ (var_of_means / marg_var))


def population_eta_discrete(joint, kernel_y):
    """Average squared MMD between P(Y | X) and P(Y), over the mean squared feature spread."""
    g = gram_matrix(kernel_y, joint.y_points)
    q = joint.y_marginal
    px, cond = joint.conditionals()
    spread = float(q @ np.diag(g) - q @ g @ q)
    if spread <= DEGENERATE_TOL:
        raise DegeneratePopulationVariance(f"feature variance {spread:.3g} is degenerate")
    diff = cond - q
    mmd2 = np.einsum("ab,bc,ac->a", diff, g, diff)
    return float(px @ mmd2 / spread)


def population_eta_pairs_discrete(joint, kernel_y):
    """Same quantity via ``1 - E||k(.,Y) - k(.,Y')||^2 | X / E||k(.,Y1) - k(.,Y2)||^2``."""
    g = gram_matrix(kernel_y, joint.y_points)
    diag = np.diag(g)
    q = joint.y_marginal
    px, cond = joint.conditionals()
    within = 2.0 * (cond @ diag) - 2.0 * np.einsum("ab,bc,ac->a", cond, g, cond)
    between = 2.0 * (q @ diag) - 2.0 * (q @ g @ q)
    return float(1.0 - (px @ within) / between)


def sample_from_joint(joint, n, seed=0):
    """i.i.d. draws by inverse-CDF over the cells; x labels become the reals 0, 1, 2, ..."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    flat = joint.probs.ravel()
    cdf = np.cumsum(flat)
    cell = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
    cell = np.minimum(cell, np.flatnonzero(flat > 0)[-1])
    a, b = np.divmod(cell, joint.probs.shape[1])
    return SampleSet(a.astype(float), joint.y_points[b], REAL, joint.y_kind)
