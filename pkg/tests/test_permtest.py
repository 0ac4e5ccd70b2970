import numpy as np
import pytest

from kernel_r2.estimators import SampleSet, make_statistic
from kernel_r2.permtest import (PowerEstimate, derive_seed, p_value, permutation_test,
                                permutation_tests, permutations, power_curve, power_estimate)
from kernel_r2.simgen import gen_heteroscedastic


def test_p_value_formula():
    assert p_value(1.0, [0.0, 2.0, 1.0, 0.5]) == pytest.approx(3 / 5)
    assert p_value(10.0, np.zeros(99)) == pytest.approx(0.01)


def test_permutations_reproducible():
    a, b = permutations(20, 5, 3), permutations(20, 5, 3)
    assert all(np.array_equal(p, q) for p, q in zip(a, b))
    assert sorted(a[0]) == list(range(20))
    assert not np.array_equal(a[0], permutations(20, 1, 4)[0])
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3) != derive_seed(1, 2, 4)


def test_detects_dependence():
    s = gen_heteroscedastic(100, 0.0, 0)
    r = permutation_test(make_statistic("knn"), s, 99, seed=1)
    assert r.p_value == pytest.approx(0.01)
    assert r.to_dict()["B"] == 99


def test_workers_do_not_change_result():
    s = gen_heteroscedastic(60, 0.5, 2)
    stats = {"knn": make_statistic("knn"), "xi": make_statistic("xi")}
    one = permutation_tests(stats, s, 30, 5, workers=1)
    many = permutation_tests(stats, s, 30, 5, workers=3)
    for name in stats:
        np.testing.assert_array_equal(one[name].permutation_stats, many[name].permutation_stats)


def test_statistic_errors_propagate():
    def boom(sample):
        raise RuntimeError("bad")
    with pytest.raises(RuntimeError):
        permutation_test(boom, SampleSet(np.arange(5.0), np.arange(5.0)), 3, 0)


def test_power_estimate_fields():
    est = power_estimate("heteroscedastic", make_statistic("xi"), 40, 0.0, 6, 19, seed=2)
    assert isinstance(est, PowerEstimate)
    assert est.R == 6 and 0 <= est.rejections <= 6
    assert est.standard_error == pytest.approx(np.sqrt(est.power * (1 - est.power) / 6))
    curve = power_curve("heteroscedastic", {"xi": make_statistic("xi")}, 40, [0.0, 1.0], 4, 19,
                        seed=2, workers=2)
    assert [c.lam for c in curve] == [0.0, 1.0]
    again = power_curve("heteroscedastic", {"xi": make_statistic("xi")}, 40, [0.0, 1.0], 4, 19,
                        seed=2)
    assert [c.to_dict() for c in curve] == [c.to_dict() for c in again]
