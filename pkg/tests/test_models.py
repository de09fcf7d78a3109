import math
import re

import numpy as np
import pytest

from src.core.config import Config
from src.core.errors import AmbientMismatchError, CapacityError, DomainError, MalformedInputError
from src.data.models import KD_TREE_THRESHOLD, EmptySet, FiniteMetricSpace, PointMap, PointSet


def test_x3_distances(x3):
    D = x3.distance_matrix()
    np.testing.assert_array_equal(D, [[0, 3, 4], [3, 0, 5], [4, 5, 0]])
    assert x3.distance(1, 2) == 5.0
    assert x3.index_of("c") == 2


def test_matrix_space_distances():
    space = FiniteMetricSpace.from_matrix(["p", "q"], [[0, 0.5], [0.5, 0]])
    assert space.metric == "matrix"
    assert space.distance(0, 1) == 0.5


def test_corrupted_matrix_reports_triangle_witness(corrupted_matrix):
    with pytest.raises(MalformedInputError) as excinfo:
        FiniteMetricSpace.from_matrix(["p", "q", "r"], corrupted_matrix)
    witness = excinfo.value.witness
    assert witness["axiom"] == "triangle"
    assert witness["points"] == ["p", "q", "r"]
    assert excinfo.value.exit_code == 2


@pytest.mark.parametrize("matrix, fragment", [
    ([[0, 1], [2, 0]], "symmetric"),
    ([[0, -1], [-1, 0]], "nonnegative"),
    ([[1, 1], [1, 0]], "d(p,p)"),
    ([[0, 0], [0, 0]], "distance 0"),
    ([[0, float("nan")], [float("nan"), 0]], "finite"),
])
def test_matrix_axiom_failures(matrix, fragment):
    with pytest.raises(MalformedInputError, match=re.escape(fragment)):
        FiniteMetricSpace.from_matrix(["p", "q"], matrix)


def test_unvalidated_matrix_is_kept_as_given(corrupted_matrix):
    space = FiniteMetricSpace.from_matrix(["p", "q", "r"], corrupted_matrix, validate=False)
    assert space.distance(0, 2) == 10.0


def test_duplicate_ids_and_coordinates_rejected():
    with pytest.raises(MalformedInputError, match="Duplicate"):
        FiniteMetricSpace.from_coords([[0.0], [1.0]], ids=["x", "x"])
    with pytest.raises(MalformedInputError, match="share coordinates"):
        FiniteMetricSpace.from_coords([[0.0, 1.0], [0.0, 1.0]])


def test_minkowski_p_is_normalized():
    assert FiniteMetricSpace.from_coords(np.eye(3), metric="minkowski", p=1).metric == "manhattan"
    assert FiniteMetricSpace.from_coords(np.eye(3), metric="minkowski", p=2).metric == "euclidean"
    assert FiniteMetricSpace.from_coords(np.eye(3), metric="minkowski", p=math.inf).metric == "chebyshev"
    space = FiniteMetricSpace.from_coords(np.eye(3), metric="minkowski", p=3)
    assert space.distance(0, 1) == pytest.approx(2 ** (1 / 3), rel=1e-12)
    with pytest.raises(DomainError):
        FiniteMetricSpace.from_coords(np.eye(3), metric="minkowski", p=0.5)


def test_discrete_metric_needs_no_coordinates():
    space = FiniteMetricSpace(["u", "v", "w"], metric="discrete")
    np.testing.assert_array_equal(space.distance_matrix(), 1 - np.eye(3))


def test_point_caps():
    small = Config(MAX_POINTS=3, MAX_GRID_POINTS=3)
    with pytest.raises(CapacityError):
        FiniteMetricSpace.from_matrix(list("abcd"), 1 - np.eye(4), config=small)
    with pytest.raises(CapacityError):
        FiniteMetricSpace.from_coords(np.arange(4.0), config=small)


def test_point_set_is_sorted_unique_and_nonempty(x3):
    A = PointSet(x3, [2, 0, 2])
    assert list(A) == [0, 2]
    assert A.ids == ["a", "c"]
    assert 2 in A and 1 not in A
    with pytest.raises(DomainError):
        PointSet(x3, [])
    with pytest.raises(DomainError):
        PointSet(x3, [3])


def test_point_set_algebra(x3):
    A, B = x3.subset([0, 1]), x3.subset([1, 2])
    assert A.union(B) == x3.full()
    assert A.intersection(B) == x3.singleton(1)
    assert isinstance(x3.singleton(0).intersection(x3.singleton(1)), EmptySet)
    assert x3.singleton(1).issubset(A)
    assert not A.issubset(B)
    assert hash(x3.subset([0, 1])) == hash(A)


def test_sets_over_different_spaces_do_not_mix(x3, line4):
    with pytest.raises(AmbientMismatchError):
        x3.full().issubset(line4.full())


def test_point_map_tables(x3, line4):
    T = PointMap.from_ids(x3, line4, {"a": "0", "b": "3", "c": "3"})
    assert T(1) == 3
    assert not T.injective and not T.surjective
    with pytest.raises(DomainError):
        T.inverse()
    with pytest.raises(MalformedInputError, match="not total"):
        PointMap.from_ids(x3, line4, {"a": "0"})

    identity = PointMap.identity(x3)
    assert identity.bijective
    np.testing.assert_array_equal(identity.inverse().table, [0, 1, 2])


def test_kd_tree_path_matches_dense_blocks():
    rng = np.random.default_rng(7)
    n = 3000
    space = FiniteMetricSpace.from_coords(rng.random((n, 2)), validate=False)
    targets = np.arange(1, n, 2)
    assert n * targets.size > KD_TREE_THRESHOLD
    fast = space.nearest_distances(np.arange(n), targets)
    dense = np.concatenate([space.block(chunk, targets).min(axis=1)
                            for chunk in np.array_split(np.arange(n), 8)])
    np.testing.assert_allclose(fast, dense, rtol=1e-10, atol=1e-15)
    assert np.all(fast[targets] == 0)


def test_isolation_distances(x3):
    np.testing.assert_array_equal(x3.isolation_distances(), [3, 3, 4])
