import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kernel_r2.errors import EmptySample, InsufficientPoints
from kernel_r2.neighbours import (EUCLIDEAN, GEODESIC, NeighbourTable, build_vp_tree,
                                  distance_matrix, flatten_points, in_degree_diagnostic,
                                  k_nearest_excluding, knn_in_degrees, neighbour_table,
                                  neighbour_table_bruteforce, tie_priorities)

from conftest import random_rotations


def brute_excluding(x, center, exclude, k, seed, metric=EUCLIDEAN):
    flat = flatten_points(x, "rotation" if metric == GEODESIC else "real")
    d = distance_matrix(flat, metric)[center].copy()
    d[list(exclude) + [center]] = np.inf
    prio = tie_priorities(seed, [center], np.arange(len(d)))[0]
    return np.lexsort((prio, d))[:k]


def test_tree_matches_bruteforce_continuous(rng):
    x = rng.normal(size=(300, 3))
    table = neighbour_table(x, 6, seed=3)
    ref = neighbour_table_bruteforce(flatten_points(x), EUCLIDEAN, 6, 3)
    assert np.array_equal(table.indices, ref)


def test_tree_matches_bruteforce_with_ties():
    # integer grid: every point has many equidistant neighbours
    g = np.stack(np.meshgrid(np.arange(8.0), np.arange(8.0)), -1).reshape(-1, 2)
    for seed in (0, 1, 99):
        table = neighbour_table(g, 5, seed=seed)
        ref = neighbour_table_bruteforce(flatten_points(g), EUCLIDEAN, 5, seed)
        assert np.array_equal(table.indices, ref)


def test_tree_geodesic(rng):
    rot = random_rotations(rng, 120)
    table = neighbour_table(rot, 4, seed=5, metric="geodesic")
    ref = neighbour_table_bruteforce(flatten_points(rot, "rotation"), GEODESIC, 4, 5)
    assert np.array_equal(table.indices, ref)


def test_exclusion_query(rng):
    x = rng.normal(size=(80, 2))
    tree = build_vp_tree(x, seed=1)
    for center in (0, 17, 79):
        ex = [3, 5, center, 40]
        got = k_nearest_excluding(tree, center, ex, 5, tie_seed=8)
        assert np.array_equal(got, brute_excluding(x, center, ex, 5, 8))
        assert center not in got and not set(got) & set(ex)


def test_ties_broken_by_seed():
    # the four axis neighbours of the origin are equidistant
    x = np.array([[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1], [5, 5]], dtype=float)
    firsts = {int(neighbour_table(x, 1, seed=s).indices[0, 0]) for s in range(40)}
    assert firsts == {1, 2, 3, 4}
    a = neighbour_table(x, 3, seed=7).indices
    assert np.array_equal(a, neighbour_table(x, 3, seed=7).indices)


def test_external_query(rng):
    x = rng.normal(size=(50, 2))
    tree = build_vp_tree(x)
    q = np.array([0.1, -0.2])
    d = np.linalg.norm(x - q, axis=1)
    assert set(tree.query(q, 4)) == set(np.argsort(d)[:4])


def test_errors():
    with pytest.raises(EmptySample):
        build_vp_tree(np.zeros((0, 2)))
    with pytest.raises(InsufficientPoints):
        neighbour_table(np.zeros((3, 1)), 3, seed=0)
    tree = build_vp_tree(np.arange(4.0))
    with pytest.raises(InsufficientPoints):
        k_nearest_excluding(tree, 0, [1, 2], 2, 0)


def test_in_degree(rng):
    table = NeighbourTable(np.array([[1], [0], [0], [0]]), 1, 0)
    assert knn_in_degrees(table, 4).tolist() == [3, 1, 0, 0]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        diag = in_degree_diagnostic(table, 4, warn_factor=2)
    assert diag["max_in_degree"] == 3 and caught
    x = rng.uniform(size=(500, 2))
    t = neighbour_table(x, 5, seed=0)
    assert knn_in_degrees(t, 500).sum() == 2500
    assert in_degree_diagnostic(t, 500)["max_in_degree_over_k"] < 10


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 60), st.integers(1, 4), st.integers(0, 2 ** 32), st.booleans())
def test_tree_equals_bruteforce_property(n, k, seed, discrete):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 4, size=(n, 2)).astype(float) if discrete else rng.normal(size=(n, 2))
    table = neighbour_table(x, k, seed=seed)
    ref = neighbour_table_bruteforce(flatten_points(x), EUCLIDEAN, k, seed)
    assert np.array_equal(table.indices, ref)
