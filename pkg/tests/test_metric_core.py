import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.core.errors import AmbientMismatchError, DomainError
from src.data.models import EmptySet, FiniteMetricSpace, PointSet
from src.processors.gallery import random_space, shrinking_intervals
from src.processors.lift import all_subsets
from src.processors.metric_core import (
    check_metric_axioms,
    closed_neighborhood,
    complement,
    complement_hausdorff_inequalities,
    diameter,
    directed_hausdorff,
    dist_point_to_set,
    gap_functional,
    hausdorff,
    hausdorff_matrix,
    hausdorff_via_neighborhoods,
    inscribed_radius_bound,
    isolation,
    nearest_member,
    neighborhood,
)
from src.processors.parallel_processor import ParallelProcessor


def sets(space, *names):
    return [space.subset_by_ids(list(n)) for n in names]


def test_point_to_set_distance(x3):
    a = x3.index_of("a")
    assert dist_point_to_set(a, x3.subset_by_ids(["b", "c"])) == 3
    assert dist_point_to_set(a, x3.subset_by_ids(["a", "b"])) == 0
    assert dist_point_to_set(a, complement(x3.full())) == math.inf


def test_nearest_member_prefers_lowest_index(line4):
    assert nearest_member(1, line4.subset([0, 2])) == (0, 1.0)
    assert nearest_member(3, line4.subset([0, 2])) == (2, 1.0)


def test_directed_and_full_hausdorff_on_x3(x3):
    A, BC = sets(x3, "a", "bc")
    assert directed_hausdorff(A, BC) == 3
    assert directed_hausdorff(BC, A) == 4
    assert directed_hausdorff(A, A) == 0
    assert hausdorff(A, BC) == 4
    assert hausdorff(BC, BC) == 0


def test_directed_distance_against_empty_set(x3):
    empty = EmptySet(x3)
    assert directed_hausdorff(x3.full(), empty) == math.inf
    assert directed_hausdorff(empty, x3.full()) == 0


def test_hausdorff_rejects_mixed_spaces(x3, line4):
    with pytest.raises(AmbientMismatchError):
        hausdorff(x3.full(), line4.full())


def test_shrinking_interval_gap():
    family = shrinking_intervals(pitch=1e-3, n_max=4)
    assert hausdorff(family.at(1), family.at(2)) == pytest.approx(0.5, abs=1e-12)


def test_neighborhood_oracle_on_x3(x3):
    A, BC = sets(x3, "a", "bc")
    assert hausdorff_via_neighborhoods(A, BC) == 4
    assert hausdorff_via_neighborhoods(BC, BC) == 0


def test_open_neighborhood_semantics(x3):
    A = x3.subset_by_ids(["a"])
    assert neighborhood(A, 3.5).ids == ["a", "b"]
    assert neighborhood(A, 3).ids == ["a"]
    assert neighborhood(x3.full(), 0.1) == x3.full()
    assert closed_neighborhood(A, 3).ids == ["a", "b"]
    with pytest.raises(DomainError):
        neighborhood(A, 0)


def test_neighborhoods_are_monotone(x3):
    A = x3.subset_by_ids(["b"])
    radii = [0.5, 3.0, 3.5, 5.0, 5.5]
    for small, large in zip(radii, radii[1:]):
        assert neighborhood(A, small).issubset(neighborhood(A, large))


def test_diameter(x3):
    assert diameter(x3.subset_by_ids(["b", "c"])) == 5
    assert diameter(x3.singleton(0)) == 0


@pytest.mark.parametrize("metric", ["euclidean", "manhattan", "chebyshev"])
def test_fast_diameter_paths_match_brute_force(metric):
    rng = np.random.default_rng(3)
    coords = rng.random((2200, 2))
    space = FiniteMetricSpace.from_coords(coords, metric=metric, validate=False)
    brute = float(space.distance_matrix().max())
    assert diameter(space.full()) == pytest.approx(brute, rel=1e-12)


def test_complement(x3):
    A = x3.subset_by_ids(["a"])
    assert complement(A).ids == ["b", "c"]
    assert complement(x3.full()).is_empty
    assert complement(complement(A)) == A


def test_gap_functional_on_x3(x3):
    assert gap_functional(x3.subset_by_ids(["a"])) == 3
    assert gap_functional(x3.subset_by_ids(["a", "b"])) == 5
    assert gap_functional(x3.full()) == math.inf


def test_gap_functional_can_exceed_the_set_diameter(x3):
    AB = x3.subset_by_ids(["a", "b"])
    assert gap_functional(AB) > diameter(AB)
    assert gap_functional(AB) <= inscribed_radius_bound(AB) <= diameter(x3.full())


def test_isolation(x3):
    assert isolation(0, x3) == 3
    pair = FiniteMetricSpace.from_coords([0.0, 1.0])
    assert isolation(0, pair) == isolation(1, pair) == 1
    with pytest.raises(DomainError):
        isolation(0, FiniteMetricSpace.from_coords([0.0]))


def test_singleton_gap_equals_isolation(x3):
    for x in range(len(x3)):
        assert gap_functional(x3.singleton(x)) == isolation(x, x3)


def test_complement_clauses_on_disjoint_x3_pair(x3):
    report = complement_hausdorff_inequalities(*sets(x3, "a", "b"))
    clause_b = next(c for c in report.clauses if c.clause == "b")
    assert clause_b.applicable
    assert clause_b.lhs == 3 and clause_b.rhs == 3
    assert report.satisfied


def test_complement_clauses_on_equal_sets(x3):
    A = x3.subset_by_ids(["a", "c"])
    report = complement_hausdorff_inequalities(A, A)
    clause_a = next(c for c in report.clauses if c.clause == "a")
    assert clause_a.lhs == 0
    assert report.satisfied


def test_complement_clause_c_in_both_orientations(line4):
    inner, outer = line4.subset([1]), line4.subset([0, 1, 2])
    forward = complement_hausdorff_inequalities(inner, outer)
    backward = complement_hausdorff_inequalities(outer, inner)
    assert next(c for c in forward.clauses if c.clause == "c").orientation == "A,B"
    assert next(c for c in backward.clauses if c.clause == "c").orientation == "B,A"
    assert forward.satisfied and backward.satisfied


def test_complement_clauses_are_vacuous_for_the_full_space(x3):
    report = complement_hausdorff_inequalities(x3.full(), x3.singleton(0))
    assert next(c for c in report.clauses if c.clause == "a").vacuous
    assert report.complement_hausdorff is None


def test_hausdorff_matrix_matches_pairwise_calls(x3):
    family = all_subsets(x3)
    H = hausdorff_matrix(family)
    for i, j in itertools.product(range(len(family)), repeat=2):
        assert H[i, j] == hausdorff(family[i], family[j])


def test_check_metric_axioms_finds_the_triangle_witness(corrupted_matrix):
    space = FiniteMetricSpace.from_matrix(["p", "q", "r"], corrupted_matrix, validate=False)
    violations = check_metric_axioms(space)
    assert violations and all(v["axiom"] == "triangle" for v in violations)
    assert violations[0]["points"] == ["p", "q", "r"]


def test_parallel_sup_matches_serial():
    rng = np.random.default_rng(11)
    space = FiniteMetricSpace.from_coords(rng.random((9000, 2)), validate=False)
    A, B = space.subset(np.arange(0, 9000, 2)), space.subset(np.arange(1, 9000, 7))
    parallel = ParallelProcessor(space.config, workers=4)
    assert directed_hausdorff(A, B, parallel) == pytest.approx(directed_hausdorff(A, B), rel=1e-12)


@st.composite
def space_and_sets(draw):
    size = draw(st.integers(min_value=2, max_value=6))
    seed = draw(st.integers(min_value=0, max_value=2 ** 32 - 1))
    space = random_space(size, seed)
    masks = st.lists(st.booleans(), min_size=size, max_size=size).filter(any)
    picks = [np.flatnonzero(draw(masks)) for _ in range(3)]
    return space, [PointSet(space, p) for p in picks]


@settings(max_examples=200, derandomize=True, deadline=None)
@given(space_and_sets())
def test_hausdorff_metric_axioms(case):
    space, (A, B, C) = case
    h_ab = hausdorff(A, B)
    assert h_ab >= 0
    assert h_ab == hausdorff(B, A)
    assert (h_ab == 0) == (A == B)
    assert hausdorff(A, C) <= hausdorff(A, B) + hausdorff(B, C) + 1e-12
    assert h_ab <= diameter(space.full())
    assert (directed_hausdorff(A, B) == 0) == A.issubset(B)


@settings(max_examples=200, derandomize=True, deadline=None)
@given(space_and_sets())
def test_neighborhood_oracle_is_exact(case):
    _, (A, B, _) = case
    assert hausdorff_via_neighborhoods(A, B) == hausdorff(A, B)


@settings(max_examples=100, derandomize=True, deadline=None)
@given(space_and_sets(), st.floats(min_value=0.01, max_value=20))
def test_small_hausdorff_distance_means_mutual_neighborhoods(case, eps):
    _, (A, B, _) = case
    if hausdorff(A, B) < eps:
        assert A.issubset(neighborhood(B, eps))
        assert B.issubset(neighborhood(A, eps))


@settings(max_examples=100, derandomize=True, deadline=None)
@given(space_and_sets())
def test_gap_functional_is_monotone(case):
    _, (A, B, _) = case
    union = A.union(B)
    assert gap_functional(A) <= gap_functional(union)
