import pytest

from src.core.errors import DomainError
from src.core.suites import MAX_STORED_VIOLATIONS, SuiteReport, SuiteRunner
from src.data.models import FiniteMetricSpace
from src.processors.parallel_processor import ParallelProcessor
from src.processors.sequences import EscapeBound


@pytest.fixture
def runner(config):
    return SuiteRunner(config, ParallelProcessor(config, workers=1))


@pytest.mark.parametrize("suite, trials", [
    ("metric-axioms", 5),
    ("neighborhood-oracle", 5),
    ("lemma-complements", 60),
    ("lift-lipschitz", 10),
    ("lift-expansive", 10),
    ("singleton-isometry", 5),
    ("chain-bounds", 5),
    ("nesting", 3),
])
def test_suites_pass_on_seeded_fixtures(runner, suite, trials):
    report = runner.run(suite, trials=trials, seed=42)
    assert report.passed, report.violations[:3]
    assert report.cases > 0
    assert report.to_dict()["verdict"] == "pass"


def test_unknown_suite(runner):
    with pytest.raises(DomainError, match="Unknown suite"):
        runner.run("no-such-suite")


def test_negative_trials(runner):
    with pytest.raises(DomainError):
        runner.run("nesting", trials=-1)


def test_reports_are_reproducible(runner):
    first = runner.run("lemma-complements", trials=30, seed=3).to_dict()
    second = runner.run("lemma-complements", trials=30, seed=3).to_dict()
    assert first == second
    assert "wall_time" not in first


def test_timing_is_opt_in(config):
    report = SuiteRunner(config, timing=True).run("nesting", trials=1)
    assert report.wall_time is not None
    assert "wall_time" in report.to_dict()


def test_corrupted_user_space_fails_metric_axioms(runner, corrupted_matrix):
    space = FiniteMetricSpace.from_matrix(["p", "q", "r"], corrupted_matrix, validate=False, label="bad")
    report = runner.run("metric-axioms", trials=2, spaces=[space])
    assert not report.passed
    assert report.violations[0]["axiom"] == "triangle"
    assert report.violations[0]["points"] == ["p", "q", "r"]


def test_lemma_suite_counts_applicable_clauses(runner):
    report = runner.run("lemma-complements", trials=90, seed=1)
    applicable = report.details["applicable"]
    assert set(applicable) == {"a", "b", "c"}
    assert applicable["b"] > 0 and applicable["c"] > 0


def test_expansive_suite_runs_duality_on_bijections(runner):
    report = runner.run("lift-expansive", trials=40, seed=5)
    assert report.passed
    assert "duality_checks" in report.details


def test_stored_violations_are_capped():
    report = SuiteReport("demo", 0)
    for k in range(MAX_STORED_VIOLATIONS + 5):
        report.add_violation(k=k)
    assert report.violation_count == MAX_STORED_VIOLATIONS + 5
    assert len(report.violations) == MAX_STORED_VIOLATIONS
    assert report.verdict == "fail"


def test_chain_suite_reports_escaping_point_violations(runner, monkeypatch):
    monkeypatch.setattr("src.core.suites.escape_bounds",
                        lambda family, N: [EscapeBound(1, "x0", 2.0, 1.0, False)])
    report = runner.run("chain-bounds", trials=1, seed=3)
    flagged = [v for v in report.violations if v.get("check") == "escape_isolation"]
    assert not report.passed
    assert flagged and flagged[0]["isolation"] == 2.0 and flagged[0]["dhat"] == 1.0
