"""Permutation independence tests and Monte Carlo power estimates.

Every random stream is keyed by ``SeedSequence(seed, spawn_key=...)``:
permutation ``b`` of a test uses key ``(PERMUTATION, b)`` and dataset ``r`` of a
power study uses ``(DATASET, r)``. Outputs therefore depend only on the seed,
never on how work is spread over threads. Statistics compared on the same
dataset see the same permutations.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .simgen import SCENARIOS

PERMUTATION = 0
DATASET = 1
TEST = 2


def stream(seed, *keys):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(keys)))


def derive_seed(seed, *keys):
    """63-bit integer seed derived from ``(seed, keys)``."""
    state = np.random.SeedSequence(int(seed), spawn_key=tuple(keys)).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def _map(fn, items, workers):
    if workers is None or workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class PermutationTestResult:
    observed_stat: float
    permutation_stats: np.ndarray
    p_value: float
    B: int
    seed: int

    def to_dict(self, include_stats=True):
        out = {"observed_stat": float(self.observed_stat), "p_value": float(self.p_value),
               "B": int(self.B), "seed": int(self.seed)}
        if include_stats:
            out["permutation_stats"] = [float(s) for s in self.permutation_stats]
        return out


def p_value(observed, permuted):
    permuted = np.asarray(permuted, dtype=float)
    return (1.0 + np.count_nonzero(permuted >= observed)) / (1.0 + len(permuted))


def permutations(n, B, seed):
    """The B permutations of ``range(n)`` used by a test with this seed."""
    return [stream(seed, PERMUTATION, b).permutation(n) for b in range(B)]


def permutation_tests(statistics, sample, B, seed, workers=1):
    """Test several statistics against the same B permutations of the X side.

    ``statistics`` maps names to functions ``SampleSet -> float``. Errors raised
    by a statistic on a permuted dataset propagate and abort the test.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    perms = permutations(sample.n, B, seed)
    results = {}
    for name, stat in statistics.items():
        observed = float(stat(sample))
        stats = np.array(_map(lambda p: float(stat(sample.permute_x(p))), perms, workers))
        results[name] = PermutationTestResult(observed, stats, p_value(observed, stats),
                                              int(B), int(seed))
    return results


def permutation_test(statistic, sample, B, seed, workers=1):
    return permutation_tests({"stat": statistic}, sample, B, seed, workers)["stat"]


@dataclass
class PowerEstimate:
    scenario: str
    statistic: str
    n: int
    lam: float
    alpha: float
    R: int
    B: int
    rejections: int
    seed: int

    @property
    def power(self):
        return self.rejections / self.R

    @property
    def standard_error(self):
        p = self.power
        return float(np.sqrt(p * (1.0 - p) / self.R))

    def to_dict(self):
        return {"scenario": self.scenario, "statistic": self.statistic, "n": self.n,
                "lambda": self.lam, "alpha": self.alpha, "replications": self.R,
                "permutations": self.B, "rejections": self.rejections,
                "power": self.power, "se": self.standard_error, "seed": self.seed}


def _scenario(scenario):
    if callable(scenario):
        return getattr(scenario, "__name__", "custom"), scenario
    return scenario, SCENARIOS[scenario]


def replicate_pvalues(scenario, statistics, n, lam, R, B, seed, workers=1):
    """p-values ``{name: array of length R}``; dataset r is drawn from stream (DATASET, r)."""
    _, gen = _scenario(scenario)

    def one(r):
        sample = gen(n, lam, np.random.SeedSequence(int(seed), spawn_key=(DATASET, r)))
        res = permutation_tests(statistics, sample, B, derive_seed(seed, TEST, r))
        return {name: res[name].p_value for name in statistics}

    rows = _map(one, range(R), workers)
    return {name: np.array([row[name] for row in rows]) for name in statistics}


def power_estimates(scenario, statistics, n, lam, R, B, alpha=0.05, seed=0, workers=1):
    """One PowerEstimate per statistic; all statistics share datasets and permutations."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if R < 1 or B < 1:
        raise ValueError("R and B must be at least 1")
    name, _ = _scenario(scenario)
    pvals = replicate_pvalues(scenario, statistics, n, lam, R, B, seed, workers)
    return {stat: PowerEstimate(name, stat, int(n), float(lam), float(alpha), int(R), int(B),
                                int(np.count_nonzero(p <= alpha)), int(seed))
            for stat, p in pvals.items()}


def power_estimate(scenario, statistic, n, lam, R, B, alpha=0.05, seed=0, workers=1):
    label = getattr(statistic, "method", "stat")
    return power_estimates(scenario, {label: statistic}, n, lam, R, B, alpha, seed, workers)[label]


def power_curve(scenario, statistics, n, lambdas, R, B, alpha=0.05, seed=0, workers=1):
    """Power per (lambda, statistic). Every lambda reuses the same underlying noise draws."""
    out = []
    for lam in lambdas:
        out.extend(power_estimates(scenario, statistics, n, lam, R, B, alpha, seed,
                                   workers).values())
    return out
