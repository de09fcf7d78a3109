import math

import numpy as np
import pytest

from src.core.errors import DomainError, NestingViolationError
from src.data.models import FiniteMetricSpace, PointSet
from src.processors.gallery import lp_basis, power_functions, random_nested_family, shrinking_intervals
from src.processors.sequences import (
    DIVERGING,
    INCONCLUSIVE,
    SUMMABLE,
    NestedFamily,
    chain_select,
    classify,
    convergence_to_intersection,
    escape_bounds,
    extract_abs_convergent_subsequence,
    gap_series,
    is_absolutely_convergent_prefix,
    singleton_distances,
    summability_verdict,
    tail_family,
    truncated_intersection,
)


@pytest.fixture
def harmonic_grid():
    """Points 1/k for k = 1..400 on the line, in sequence order."""
    values = 1.0 / np.arange(1, 401)
    return FiniteMetricSpace.from_coords(values, ids=[f"1/{k}" for k in range(1, 401)])


def test_nested_family_is_one_based_and_cached(line4):
    family = NestedFamily.from_sets(line4, [line4.full(), line4.subset([1, 2, 3]), line4.subset([3])])
    assert family.at(1) == line4.full()
    assert family.at(2) is family.at(2)
    with pytest.raises(DomainError):
        family.at(0)
    with pytest.raises(DomainError):
        family.at(4)


def test_nesting_violation_reports_the_index(line4):
    family = NestedFamily.from_sets(line4, [line4.full(), line4.subset([0, 1]), line4.subset([2])])
    with pytest.raises(NestingViolationError) as excinfo:
        family.validate(3)
    assert excinfo.value.index == 2
    assert excinfo.value.exit_code == 4


def test_gap_series_on_shrinking_intervals():
    family = shrinking_intervals(pitch=1e-3, n_max=8)
    series = gap_series(family, 8)
    for n, gap in enumerate(series.gaps, start=1):
        assert abs(gap - (1 / n - 1 / (n + 1))) <= 1e-3
    assert series.partial_sums[-1] == pytest.approx(sum(series.gaps))
    assert series.diameters[0] == pytest.approx(2.0)
    assert len(series.dhat) == 8


def test_chain_bounds_hold_on_random_families():
    for seed in range(10):
        family = random_nested_family(10, 8, seed)
        chain = chain_select(family, 8, eps=0.5)
        assert chain.bounds_hold()
        assert all(s <= g for s, g in zip(chain.steps, chain.gaps))
        assert chain.proof_bounds == [g + 0.5 ** n for n, g in enumerate(chain.gaps, start=1)]
        assert len(chain.isolation) == 8


def test_chain_on_lp_basis_never_settles():
    family = lp_basis(p=2.0, n_max=10)
    chain = chain_select(family, 10)
    assert chain.steps == pytest.approx([math.sqrt(2)] * 9, rel=1e-12)


def test_chain_eps_must_be_in_unit_interval(line4):
    family = NestedFamily.from_sets(line4, [line4.full(), line4.subset([3])])
    with pytest.raises(DomainError):
        chain_select(family, 2, eps=1.0)


def test_chain_terminal_point_approaches_zero():
    pitch, N = 0.05, 20
    family = shrinking_intervals(pitch, N)
    chain = chain_select(family, N)
    assert abs(family.space.coords[chain.indices[-1], 0]) <= pitch + 1e-12


def test_extraction_with_a_cauchy_modulus(harmonic_grid):
    seq = np.arange(400)
    extraction = extract_abs_convergent_subsequence(harmonic_grid, seq, lambda eps: math.ceil(2 / eps))
    assert extraction.truncated
    assert extraction.positions == sorted(set(extraction.positions))
    assert extraction.step_sum <= 1.0
    assert extraction.within_bound
    assert extraction.modulus_verified


def test_extraction_rejects_a_non_decreasing_schedule(harmonic_grid):
    with pytest.raises(DomainError):
        extract_abs_convergent_subsequence(harmonic_grid, np.arange(400), lambda eps: 1, schedule=[0.5, 0.5])


def test_prefix_budget_and_cauchy_estimate(harmonic_grid):
    seq = np.arange(0, 400, 37)
    verdict = is_absolutely_convergent_prefix(harmonic_grid, seq, budget=1.0)
    assert verdict.within_budget
    assert verdict.cauchy_consistent
    assert is_absolutely_convergent_prefix(harmonic_grid, seq, budget=0.1).verdict == "exceeded"


def test_truncated_intersection_equals_the_last_set():
    family = shrinking_intervals(pitch=1e-2, n_max=10)
    intersection = truncated_intersection(family, 10)
    assert intersection == family.at(10)
    assert "0" in intersection.ids


def test_convergence_to_the_intended_limit():
    pitch = 1e-3
    family = shrinking_intervals(pitch, 16)
    distances = convergence_to_intersection(family, 16, family.limit)
    for n, h in enumerate(distances, start=1):
        assert abs(h - 1 / n) <= pitch


def test_convergence_needs_a_contained_limit(line4):
    family = NestedFamily.from_sets(line4, [line4.full(), line4.subset([1, 2])])
    with pytest.raises(NestingViolationError):
        convergence_to_intersection(family, 2, line4.subset([0]))


def test_singleton_distances_decrease_toward_one():
    pitch = 1e-3
    family = shrinking_intervals(pitch, 16)
    one = family.space.index_of("1")
    distances = singleton_distances(family, 16, one)
    assert distances[0] == pytest.approx(2.0)
    assert all(a >= b for a, b in zip(distances, distances[1:]))
    assert abs(distances[-1] - (1 + 1 / 16)) <= pitch


def test_tail_family_of_a_convergent_sequence(harmonic_grid):
    family = tail_family(harmonic_grid, np.arange(0, 400, 10))
    family.validate(40)
    series = gap_series(family, 40, with_dhat=False)
    assert all(a >= b for a, b in zip(series.diameters, series.diameters[1:]))


@pytest.mark.parametrize("gaps, expected", [
    ([1 / n ** 2 for n in range(1, 21)], SUMMABLE),
    ([1 / math.sqrt(n) for n in range(1, 21)], DIVERGING),
    ([math.sqrt(2)] * 20, DIVERGING),
    ([0.0] * 20, SUMMABLE),
    ([1.0, 0.0], INCONCLUSIVE),
])
def test_summability_heuristic(gaps, expected):
    verdict, _ = summability_verdict(gaps, tol=1e-9)
    assert verdict == expected


def test_classify_reports_a_labeled_heuristic():
    family = shrinking_intervals(pitch=1e-3, n_max=16)
    report = classify(family, 16)
    assert report.verdict == SUMMABLE
    assert report.verdict_basis.startswith("heuristic")
    assert report.nonempty_at_truncation
    assert report.chain_bounds_hold
    assert report.diameter_monotone
    assert len(report.rows()) == 16
    assert report.rows()[-1]["H_n"] is None
    assert report.limit_distances is not None


def test_classify_needs_four_terms(line4):
    family = NestedFamily.from_sets(line4, [line4.full(), line4.subset([3])])
    with pytest.raises(DomainError):
        classify(family, 2)


def test_nested_family_rejects_sets_from_another_space(x3, line4):
    family = NestedFamily(line4, lambda n: PointSet(x3, [0]), "foreign")
    with pytest.raises(DomainError):
        family.at(1)


def test_classify_power_functions_as_diverging():
    report = classify(power_functions(pitch=1e-3, i_max=200, n_max=16), 16)
    assert report.verdict == DIVERGING
    assert report.partial_sum > 0.9 * sum(1 / (n + 1) for n in range(1, 16)) / math.e
    assert report.nonempty_at_truncation
    assert report.escape_bounds_hold


def test_gap_series_ignores_point_labels():
    rng = np.random.default_rng(3)
    coords = rng.random((12, 2))
    perm = rng.permutation(12)
    position = np.argsort(perm)
    order = rng.permutation(12)
    space = FiniteMetricSpace.from_coords(coords, ids=[f"p{k}" for k in range(12)])
    relabeled = FiniteMetricSpace.from_coords(coords[perm], ids=[f"q{k}" for k in range(12)])

    family = NestedFamily(space, lambda n: PointSet(space, np.sort(order[n - 1:])), "original", max_horizon=8)
    moved = NestedFamily(relabeled, lambda n: PointSet(relabeled, np.sort(position[order[n - 1:]])),
                         "relabeled", max_horizon=8)
    a, b = gap_series(family, 8), gap_series(moved, 8)
    assert b.gaps == pytest.approx(a.gaps, rel=1e-12)
    assert b.diameters == pytest.approx(a.diameters, rel=1e-12)
    assert b.dhat == pytest.approx(a.dhat, rel=1e-12)


def test_extraction_of_an_eventually_constant_sequence(harmonic_grid):
    seq = [0, 1, 2] + [3] * 17
    extraction = extract_abs_convergent_subsequence(harmonic_grid, seq, lambda eps: 3)
    assert extraction.positions[0] == 3
    assert extraction.positions == list(range(3, 20))
    assert extraction.step_sum == 0.0
    assert extraction.truncated
    assert extraction.modulus_verified


def test_escaping_points_are_no_more_isolated_than_the_gap_functional():
    for seed in range(10):
        family = random_nested_family(10, 8, seed)
        bounds = escape_bounds(family, 8)
        assert [b.n for b in bounds] == list(range(1, 8))
        for b in bounds:
            assert b.point in family.at(b.n).ids
            assert b.point not in family.at(b.n + 1).ids
            assert b.isolation <= b.dhat
            assert b.holds
    assert bounds[0].dhat == math.inf


def test_escape_bounds_skip_steps_where_nothing_leaves(line4):
    family = NestedFamily.from_sets(line4, [line4.subset([0, 1, 2]), line4.subset([0, 1, 2]), line4.subset([2])])
    bounds = escape_bounds(family, 3)
    assert bounds[0].point is None and bounds[0].holds
    # x_2 = "0": I = 1 and d^({0,1,2}) = d(0, 3) = 3
    assert bounds[1].point == "0"
    assert bounds[1].isolation == 1.0 and bounds[1].dhat == 3.0


def test_truncated_intersection_rejects_an_unchecked_family(line4, monkeypatch):
    family = NestedFamily.from_sets(line4, [line4.full(), line4.subset([0, 1, 2]), line4.subset([2, 3])])
    monkeypatch.setattr(family, "validate", lambda N: None)
    with pytest.raises(NestingViolationError) as excinfo:
        truncated_intersection(family, 3)
    assert excinfo.value.index == 3
