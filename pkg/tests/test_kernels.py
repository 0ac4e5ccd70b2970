import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kernel_r2.errors import DegenerateSample, DimensionMismatch, InvalidRotation
from kernel_r2.kernels import (SO3_LIMIT, KernelSpec, brownian, check_rotations, cross_gram,
                               eval_kernel, gaussian, gaussian_median, gram_matrix,
                               median_heuristic_bandwidth, rotation_angles, so3,
                               so3_geodesic_angle, so3_kernel_from_angle)
from kernel_r2.simgen import rotation_r1, rotation_r3

from conftest import random_rotations


def test_gaussian_values():
    k = gaussian(2.0)
    assert eval_kernel(k, [0.0], [0.0]) == 1.0
    assert eval_kernel(k, [0.0], [2.0]) == pytest.approx(np.exp(-0.5), abs=1e-15)
    assert eval_kernel(gaussian(1.0, 2), [1.0, 0.0], [0.0, 1.0]) == pytest.approx(np.exp(-1.0))


def test_brownian_values():
    k = brownian()
    # |a| + |b| - |a - b|
    assert eval_kernel(k, [3.0], [1.0]) == 2.0
    assert eval_kernel(k, [3.0], [-1.0]) == 0.0
    assert eval_kernel(k, [3.0, 4.0], [0.0, 0.0]) == 0.0
    assert eval_kernel(k, [3.0, 4.0], [3.0, 4.0]) == 10.0


def test_so3_kernel_values():
    assert so3_kernel_from_angle(np.pi / 2) == pytest.approx(np.pi ** 3 / 32, abs=1e-14)
    assert SO3_LIMIT == pytest.approx(np.pi ** 2 / 8)
    eye = np.eye(3)
    assert eval_kernel(so3(), eye, eye) == SO3_LIMIT
    # half turn hits the other removable singularity
    assert eval_kernel(so3(), eye, rotation_r1(np.pi)) == pytest.approx(SO3_LIMIT)
    assert so3_kernel_from_angle(1e-8) == SO3_LIMIT
    assert so3_kernel_from_angle(np.pi - 1e-8) == SO3_LIMIT


def test_so3_kernel_continuous_at_limits():
    near = so3_kernel_from_angle(np.array([1e-5, np.pi - 1e-5]))
    np.testing.assert_allclose(near, SO3_LIMIT, rtol=1e-4)


def test_geodesic_angle():
    assert so3_geodesic_angle(np.eye(3), rotation_r3(0.7)) == pytest.approx(0.7)
    assert so3_geodesic_angle(rotation_r1(0.3), rotation_r1(-0.2)) == pytest.approx(0.5)


def test_gram_properties(rng):
    x = rng.normal(size=(40, 3))
    for spec in (gaussian(1.3, 3), brownian(3)):
        g = gram_matrix(spec, x)
        assert np.array_equal(g, g.T)
        assert np.linalg.eigvalsh(g).min() > -1e-9
        np.testing.assert_allclose(g[3, 7], eval_kernel(spec, x[3], x[7]), atol=1e-13)
    rot = random_rotations(rng, 30)
    g = gram_matrix(so3(), rot)
    assert np.array_equal(g, g.T)
    assert np.allclose(np.diag(g), SO3_LIMIT)
    # bounded, attained on the diagonal and at half turns
    assert g.max() <= SO3_LIMIT + 1e-12 and g.min() >= 0.0


def test_cross_gram_matches_gram(rng):
    x = rng.normal(size=(10, 2))
    spec = gaussian(0.8, 2)
    np.testing.assert_allclose(cross_gram(spec, x, x), gram_matrix(spec, x), atol=1e-14)


def test_spec_validation():
    with pytest.raises(ValueError):
        gaussian(0.0)
    with pytest.raises(ValueError):
        gaussian(-1.0)
    with pytest.raises(DimensionMismatch):
        gram_matrix(gaussian(1.0, 2), np.zeros((4, 3)))
    assert gaussian(1.0).bounded and so3().bounded and not brownian().bounded
    assert KernelSpec("gaussian", 2.0).to_dict()["bandwidth"] == 2.0


def test_rotation_validation():
    bad = np.eye(3) * 1.01
    with pytest.raises(InvalidRotation):
        check_rotations(bad[None])
    reflection = np.diag([1.0, 1.0, -1.0])
    with pytest.raises(InvalidRotation):
        check_rotations(reflection[None])


def test_median_heuristic():
    x = np.array([[0.0], [1.0], [3.0]])
    # distances 1, 2, 3
    assert median_heuristic_bandwidth(x) == 2.0
    assert gaussian_median(x).bandwidth == 2.0
    with pytest.raises(DegenerateSample):
        median_heuristic_bandwidth(np.ones((5, 1)))
    rot = np.stack([np.eye(3), rotation_r3(0.4), rotation_r3(1.0)])
    assert median_heuristic_bandwidth(rot, "geodesic") == pytest.approx(0.6)


def test_rotation_angles_symmetric(rng):
    rot = random_rotations(rng, 12)
    th = rotation_angles(rot)
    assert np.array_equal(th, th.T)
    assert np.all(np.diag(th) == 0)
    assert th[2, 5] == pytest.approx(so3_geodesic_angle(rot[2], rot[5]))


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_so3_angle_bi_invariant(a, b, c):
    ra, rb, g = rotation_r1(a), rotation_r3(b), rotation_r1(c) @ rotation_r3(a)
    base = so3_geodesic_angle(ra, rb)
    assert so3_geodesic_angle(g @ ra, g @ rb) == pytest.approx(base, abs=1e-6)
    assert so3_geodesic_angle(ra @ g, rb @ g) == pytest.approx(base, abs=1e-6)
