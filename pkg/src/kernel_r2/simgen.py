"""Synthetic scenarios for power studies.

Random streams come from numpy's PCG64 seeded through ``default_rng``.
Normal variates are produced by inverse-CDF (``scipy.special.ndtri``) from
uniforms on the open unit interval, so a stream is fully described by the
uniform sequence.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .estimators import SampleSet
from .kernels import REAL, ROTATION

SONG_DIM = 90
SONG_ACTIVE = 5


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    n: int
    lam: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; expected one of {sorted(SCENARIOS)}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if self.n < 1:
            raise ValueError("n must be at least 1")

    def generate(self):
        return SCENARIOS[self.scenario](self.n, self.lam, self.seed)


def uniform_open(rng, size):
    """Uniforms on (0, 1) with 53-bit resolution; never exactly 0 or 1."""
    return (rng.integers(0, 1 << 53, size=size, dtype=np.int64) + 0.5) / float(1 << 53)


def standard_normal(rng, size):
    return ndtri(uniform_open(rng, size))


def rotation_r1(angle):
    """Rotation by ``angle`` in the y-z plane (about the x axis)."""
    angle = np.asarray(angle, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    out = np.zeros(angle.shape + (3, 3))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = c
    out[..., 1, 2] = -s
    out[..., 2, 1] = s
    out[..., 2, 2] = c
    return out


def rotation_r3(angle):
    """Rotation by ``angle`` in the x-y plane (about the z axis)."""
    angle = np.asarray(angle, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    out = np.zeros(angle.shape + (3, 3))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    out[..., 2, 2] = 1.0
    return out


def gen_heteroscedastic(n, lam, seed):
    """X ~ U[-1, 1], Y = 3 (1{|X| <= 0.5} (1 - lam) + lam) eps."""
    rng = np.random.default_rng(seed)
    x = 2.0 * uniform_open(rng, n) - 1.0
    eps = standard_normal(rng, n)
    scale = (np.abs(x) <= 0.5) * (1.0 - lam) + lam
    return SampleSet(x, 3.0 * scale * eps)


def so3_response(x, lam, eps1, eps2):
    x = np.asarray(x, dtype=float)
    return rotation_r1(x[:, 0] + lam * eps1) @ rotation_r3(x[:, 1] * x[:, 2] + lam * eps2)


def gen_so3(n, lam, seed):
    """X ~ N(0, I_3), Y = R1(X1 + lam eps1) R3(X2 X3 + lam eps2)."""
    rng = np.random.default_rng(seed)
    x = standard_normal(rng, (n, 3))
    eps = standard_normal(rng, (n, 2))
    y = so3_response(x, lam, eps[:, 0], eps[:, 1])
    return SampleSet(x, y, REAL, ROTATION)


def song_response(x, eps):
    return np.sin(x[:, :SONG_ACTIVE]).sum(axis=1) + 0.5 * eps


def standardize(a):
    a = np.asarray(a, dtype=float)
    return (a - a.mean(axis=0)) / a.std(axis=0)


def gen_synthetic_song(n, seed, lam=None):
    """90 standard-normal features; Y depends on the first five only. Both sides standardised."""
    rng = np.random.default_rng(seed)
    x = standard_normal(rng, (n, SONG_DIM))
    y = song_response(x, standard_normal(rng, n))
    if n > 1:
        x, y = standardize(x), standardize(y)
    return SampleSet(x, y)


SCENARIOS = {
    "heteroscedastic": gen_heteroscedastic,
    "so3": gen_so3,
    "song": lambda n, lam, seed: gen_synthetic_song(n, seed),
}
