import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.core.errors import AmbientMismatchError, DomainError
from src.data.models import FiniteMetricSpace, PointMap, PointSet
from src.processors.gallery import random_nested_family, random_space
from src.processors.lift import (
    all_subsets,
    build_set_space,
    default_family,
    duality_check,
    lift_family,
    lift_set,
    lifted_constants,
    map_constants,
    random_family,
    random_map,
    singleton_embedding,
)
from src.processors.metric_core import check_metric_axioms, hausdorff, hausdorff_matrix
from src.processors.parallel_processor import ParallelProcessor
from src.processors.sequences import gap_series


def test_lift_set_is_the_image(x3, line4):
    T = PointMap.from_ids(x3, line4, {"a": "0", "b": "2", "c": "2"})
    assert lift_set(T, x3.full()).ids == ["0", "2"]
    with pytest.raises(AmbientMismatchError):
        lift_set(T, line4.full())


def test_all_subsets_count(x3):
    family = all_subsets(x3)
    assert len(family) == 7
    assert [len(A) for A in family] == [1, 1, 1, 2, 2, 2, 3]


def test_default_family_switches_to_random_above_the_exhaustive_limit(config):
    small = random_space(4, 1, config=config)
    large = random_space(config.EXHAUSTIVE_LIMIT + 3, 1, config=config)
    assert len(default_family(small, config)) == 15
    family = default_family(large, config, seed=5)
    assert len(family) == config.RANDOM_FAMILY_SIZE
    assert len(set(family)) == len(family)
    assert [A.ids for A in family] == [A.ids for A in random_family(large, config.RANDOM_FAMILY_SIZE, 5)]


def test_set_space_is_a_metric_space(x3):
    set_space = build_set_space(x3, all_subsets(x3))
    assert len(set_space) == 7
    assert check_metric_axioms(set_space) == []
    assert set_space.ids[0] == "{a}"


def test_second_level_set_space(line4):
    first = build_set_space(line4, all_subsets(line4)[:6])
    second = build_set_space(first, all_subsets(first)[:10])
    assert check_metric_axioms(second) == []
    assert second.element(0).space is first


def test_duplicate_sets_collapse(x3):
    A = x3.subset([0])
    set_space = build_set_space(x3, [A, x3.subset([0]), x3.full()])
    assert len(set_space) == 2


def test_map_constants_of_a_scaling(line4):
    doubled = FiniteMetricSpace.from_coords([0.0, 2.0, 4.0, 6.0])
    T = PointMap(line4, doubled, [0, 1, 2, 3])
    constants = map_constants(T)
    assert constants.lipschitz_sup == 2 and constants.expansive_inf == 2
    assert constants.pairs == 6


def test_constant_map_is_not_expansive(x3, line4):
    constants = map_constants(PointMap.constant(x3, line4, 1))
    assert constants.lipschitz_sup == 0
    assert not constants.expansive


def test_map_constants_need_two_points():
    single = FiniteMetricSpace.from_coords([0.0])
    with pytest.raises(DomainError):
        map_constants(PointMap.identity(single))


def test_lifted_constants_respect_the_point_constants():
    for seed in range(20):
        domain = random_space(5, seed)
        codomain = random_space(4, seed + 100)
        T = random_map(domain, codomain, seed)
        result = lifted_constants(T, all_subsets(domain))
        assert result.lipschitz_preserved, result.violations
        assert result.lipschitz_sup <= result.point_constants.lipschitz_sup + 1e-12
        assert result.satisfied


def test_lifted_expansive_constant_for_injective_maps():
    for seed in range(20):
        domain = random_space(5, seed)
        codomain = random_space(6, seed + 100)
        T = random_map(domain, codomain, seed, injective=True)
        result = lifted_constants(T, all_subsets(domain))
        assert result.expansive_preserved, result.violations
        assert result.expansive_inf >= result.point_constants.expansive_inf - 1e-12


def test_hypothesis_notes_flag_non_injective_maps(x3, line4):
    T = PointMap.constant(x3, line4)
    notes = lifted_constants(T, all_subsets(x3)).hypothesis_notes
    assert any("not injective" in note for note in notes)
    assert any("not surjective" in note for note in notes)


def test_random_map_injective_needs_room(x3, line4):
    with pytest.raises(DomainError):
        random_map(line4, x3, 0, injective=True)


def test_singleton_embedding_is_an_isometry(x3):
    T, singletons = singleton_embedding(x3)
    np.testing.assert_array_equal(singletons.distance_matrix(), x3.distance_matrix())
    family = all_subsets(x3)
    H = hausdorff_matrix(family)
    H_lift = hausdorff_matrix([lift_set(T, A) for A in family])
    assert float(np.abs(H_lift - H).max()) == 0.0


def test_duality_of_bijective_maps(line4):
    stretched = FiniteMetricSpace.from_coords([0.0, 1.0, 3.0, 6.0])
    T = PointMap(line4, stretched, [0, 1, 2, 3])
    check = duality_check(T)
    assert check.forward.lipschitz_sup == 3
    assert check.inverse.expansive_inf == pytest.approx(1 / 3, rel=1e-12)
    assert check.inverse_expansive_matches and check.inverse_lipschitz_matches


def test_lifted_family_of_the_singleton_embedding_keeps_gaps():
    family = random_nested_family(8, 6, seed=9)
    T, _ = singleton_embedding(family.space)
    lifted = lift_family(T, family)
    lifted.validate(6)
    assert gap_series(lifted, 6, with_dhat=False).gaps == gap_series(family, 6, with_dhat=False).gaps
    assert hausdorff(lifted.at(1), lifted.at(6)) == hausdorff(family.at(1), family.at(6))


@st.composite
def map_and_sets(draw):
    n = draw(st.integers(min_value=2, max_value=6))
    m = draw(st.integers(min_value=2, max_value=6))
    seeds = [draw(st.integers(min_value=0, max_value=2 ** 32 - 1)) for _ in range(3)]
    domain, codomain = random_space(n, seeds[0]), random_space(m, seeds[1])
    T = random_map(domain, codomain, seeds[2])
    masks = st.lists(st.booleans(), min_size=n, max_size=n).filter(any)
    A, B = (PointSet(domain, np.flatnonzero(draw(masks))) for _ in range(2))
    return T, A, B


@settings(max_examples=200, derandomize=True, deadline=None)
@given(map_and_sets())
def test_lift_preserves_unions(case):
    T, A, B = case
    assert lift_set(T, A.union(B)) == lift_set(T, A).union(lift_set(T, B))


@settings(max_examples=200, derandomize=True, deadline=None)
@given(map_and_sets())
def test_lift_is_monotone(case):
    T, A, B = case
    union = A.union(B)
    assert A.issubset(union)
    assert lift_set(T, A).issubset(lift_set(T, union))
    if A.issubset(B):
        assert lift_set(T, A).issubset(lift_set(T, B))


def test_lifted_constants_do_not_depend_on_workers(config):
    domain, codomain = random_space(5, 8, config=config), random_space(3, 9, config=config)
    T = random_map(domain, codomain, 10)
    serial = lifted_constants(T, all_subsets(domain), processor=ParallelProcessor(config, workers=1))
    parallel = lifted_constants(T, all_subsets(domain), processor=ParallelProcessor(config, workers=4))
    assert parallel.violations == serial.violations
    assert parallel.pairs == serial.pairs == 31 * 30 // 2
    assert (parallel.lipschitz_sup, parallel.expansive_inf) == (serial.lipschitz_sup, serial.expansive_inf)
