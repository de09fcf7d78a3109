"""
Property suites run by ``hauslab props``.

Each suite draws seeded fixtures, checks one family of invariants and collects
every violation with the inputs needed to reproduce it.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from src.core.config import Config, DEFAULT_CONFIG
from src.core.errors import DomainError, NestingViolationError
from src.data.models import FiniteMetricSpace, PointSet
from src.processors.gallery import (
    build_gallery,
    default_galleries,
    random_nested_family,
    random_space,
    shrinking_intervals,
)
from src.processors.lift import (
    all_subsets,
    build_set_space,
    duality_check,
    lift_family,
    lift_set,
    lifted_constants,
    random_map,
    singleton_embedding,
)
from src.processors.metric_core import (
    check_metric_axioms,
    complement_hausdorff_inequalities,
    diameter,
    gap_functional,
    hausdorff,
    hausdorff_matrix,
    hausdorff_via_neighborhoods,
    inscribed_radius_bound,
)
from src.processors.parallel_processor import ParallelProcessor
from src.processors.sequences import chain_select, escape_bounds
from src.utils.helpers import leq, log_processing_stats

logger = logging.getLogger(__name__)

# Witnesses kept per report; the count covers all of them.
MAX_STORED_VIOLATIONS = 100


@dataclass
class SuiteReport:
    suite: str
    seed: int
    cases: int = 0
    violation_count: int = 0
    violations: List[Dict[str, Any]] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)
    wall_time: Optional[float] = None

    @property
    def verdict(self) -> str:
        return "pass" if self.violation_count == 0 else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def add_violation(self, **witness):
        self.violation_count += 1
        if len(self.violations) < MAX_STORED_VIOLATIONS:
            self.violations.append(witness)

    def to_dict(self) -> dict:
        data = {
            "suite": self.suite,
            "seed": self.seed,
            "cases": self.cases,
            "violation_count": self.violation_count,
            "violations": self.violations,
            "details": self.details,
            "verdict": self.verdict,
        }
        if self.wall_time is not None:
            data["wall_time"] = self.wall_time
        return data


class SuiteRunner:
    """Dispatch suite names to their checks."""

    DEFAULT_TRIALS = {
        "metric-axioms": 50,
        "neighborhood-oracle": 50,
        "lemma-complements": 500,
        "lift-lipschitz": 200,
        "lift-expansive": 200,
        "singleton-isometry": 50,
        "chain-bounds": 100,
        "nesting": 20,
    }

    def __init__(self, config: Optional[Config] = None, processor: Optional[ParallelProcessor] = None,
                 timing: bool = False):
        self.config = config or DEFAULT_CONFIG
        self.processor = processor or ParallelProcessor(self.config)
        self.timing = timing
        self.tol = self.config.TOLERANCE
        self._suites: Dict[str, Callable[..., None]] = {
            "metric-axioms": self._metric_axioms,
            "neighborhood-oracle": self._neighborhood_oracle,
            "lemma-complements": self._lemma_complements,
            "lift-lipschitz": self._lift_lipschitz,
            "lift-expansive": self._lift_expansive,
            "singleton-isometry": self._singleton_isometry,
            "chain-bounds": self._chain_bounds,
            "nesting": self._nesting,
        }

    @property
    def names(self) -> List[str]:
        return list(self._suites)

    def run(self, suite: str, trials: Optional[int] = None, seed: Optional[int] = None,
            spaces: Sequence[FiniteMetricSpace] = ()) -> SuiteReport:
        """Run one suite. ``spaces`` are extra user-supplied spaces checked alongside the seeded ones."""
        if suite not in self._suites:
            raise DomainError(f"Unknown suite '{suite}' (known: {', '.join(self._suites)})")
        seed = self.config.DEFAULT_SEED if seed is None else seed
        trials = self.DEFAULT_TRIALS[suite] if trials is None else trials
        if trials < 0:
            raise DomainError(f"trials must be >= 0, got {trials}")

        logger.info(f"Running suite '{suite}' with {trials} trials, seed {seed}")
        start_time = time.time()
        report = SuiteReport(suite, seed)
        report.details["trials"] = trials
        self._suites[suite](report, trials, np.random.default_rng(seed), list(spaces))
        elapsed = time.time() - start_time
        if self.timing:
            report.wall_time = elapsed

        log_processing_stats(f"Suite '{suite}'", report.cases, "cases", elapsed)
        if not report.passed:
            logger.warning(f"Suite '{suite}' found {report.violation_count} violations")
        return report

    # ------------------------------------------------------------------
    # fixtures
    # ------------------------------------------------------------------

    def _small_spaces(self, trials: int, rng: np.random.Generator,
                      kinds: Sequence[str] = ("matrix",)) -> List[FiniteMetricSpace]:
        limit = max(2, self.config.EXHAUSTIVE_LIMIT)
        spaces = []
        for k in range(trials):
            size = int(rng.integers(2, limit + 1))
            spaces.append(random_space(size, int(rng.integers(2 ** 32)), kind=kinds[k % len(kinds)],
                                       config=self.config))
        return spaces

    def _random_pair(self, space: FiniteMetricSpace, rng: np.random.Generator, shape: str):
        n = len(space)
        order = rng.permutation(n)
        if shape == "disjoint":
            cut = int(rng.integers(1, n))
            a = order[:int(rng.integers(1, cut + 1))]
            b = order[cut:cut + int(rng.integers(1, n - cut + 1))]
        elif shape == "nested":
            outer = order[:int(rng.integers(1, n + 1))]
            a, b = outer[:int(rng.integers(1, outer.size + 1))], outer
        else:
            a = np.flatnonzero(rng.random(n) < 0.5)
            b = np.flatnonzero(rng.random(n) < 0.5)
            a = a if a.size else order[:1]
            b = b if b.size else order[-1:]
        return PointSet(space, a), PointSet(space, b)

    # ------------------------------------------------------------------
    # suites
    # ------------------------------------------------------------------

    def _metric_axioms(self, report: SuiteReport, trials: int, rng, spaces):
        """H is a metric on all nonempty subsets of every small space, bounded by delta(X)."""
        for space in spaces:
            for violation in check_metric_axioms(space, self.tol):
                report.add_violation(space=space.label or "input", level="points", **violation)
            report.cases += 1

        for space in spaces + self._small_spaces(trials, rng):
            if check_metric_axioms(space, self.tol, limit=1):
                continue
            if len(space) > self.config.EXHAUSTIVE_LIMIT:
                logger.info(f"Skipping set-space check on {space!r}: above the exhaustive limit")
                continue
            family = all_subsets(space)
            set_space = build_set_space(space, family, label=f"sets({space.label})")
            for violation in check_metric_axioms(set_space, self.tol):
                report.add_violation(space=space.to_dict(), level="sets", **violation)
            bound = diameter(space.full())
            H = set_space.distance_matrix()
            if not leq(float(H.max()), bound, self.tol):
                i, j = np.unravel_index(int(np.argmax(H)), H.shape)
                report.add_violation(space=space.to_dict(), level="sets", axiom="bounded_by_diameter",
                                     points=[set_space.ids[i], set_space.ids[j]],
                                     H=float(H[i, j]), diameter=bound)
            report.cases += len(family) ** 2

    def _neighborhood_oracle(self, report: SuiteReport, trials: int, rng, spaces):
        """hausdorff() equals the neighborhood-containment characterization exactly."""
        mismatches = 0
        for space in self._small_spaces(trials, rng) + spaces:
            family = all_subsets(space)
            H = hausdorff_matrix(family)
            for i, A in enumerate(family):
                for j in range(i, len(family)):
                    B = family[j]
                    direct, oracle = hausdorff(A, B), hausdorff_via_neighborhoods(A, B)
                    report.cases += 1
                    if direct != oracle or direct != H[i, j]:
                        mismatches += 1
                        report.add_violation(space=space.to_dict(), A=A.ids, B=B.ids, hausdorff=direct,
                                             neighborhood_oracle=oracle, matrix=float(H[i, j]))
        report.details["mismatches"] = mismatches

    def _lemma_complements(self, report: SuiteReport, trials: int, rng, spaces):
        """The three complement inequalities and d^(A) <= inscribed bound <= delta(X)."""
        size = 8
        applicable = {"a": 0, "b": 0, "c": 0}
        shapes = ("disjoint", "nested", "general")
        for trial in range(trials):
            kind = "matrix" if trial % 2 == 0 else "euclidean"
            space = random_space(size, int(rng.integers(2 ** 32)), kind=kind, config=self.config)
            A, B = self._random_pair(space, rng, shapes[trial % 3])
            result = complement_hausdorff_inequalities(A, B, self.tol)
            report.cases += 1
            for clause in result.clauses:
                if clause.applicable and not clause.vacuous:
                    applicable[clause.clause] += 1
            if not result.satisfied:
                report.add_violation(space=space.to_dict(), report=result.to_dict())

            for S in (A, B):
                dhat, bound = gap_functional(S), inscribed_radius_bound(S)
                if math.isinf(dhat):
                    continue
                span = diameter(space.full())
                if not (leq(dhat, bound, self.tol) and leq(bound, span, self.tol)):
                    report.add_violation(space=space.to_dict(), set=S.ids, check="gap_bound",
                                         dhat=dhat, inscribed_radius_bound=bound, diameter=span)
        report.details["applicable"] = applicable

    def _lifted_suite(self, report: SuiteReport, trials: int, rng, kind: str):
        limit = max(3, self.config.EXHAUSTIVE_LIMIT)
        notes: Dict[str, int] = {}
        dualities = 0
        for _ in range(trials):
            n = int(rng.integers(3, limit + 1))
            domain = random_space(n, int(rng.integers(2 ** 32)), config=self.config)
            if kind == "expansive":
                m = int(rng.integers(n, limit + 2))
                codomain = random_space(m, int(rng.integers(2 ** 32)), config=self.config)
                T = random_map(domain, codomain, int(rng.integers(2 ** 32)), injective=True)
            else:
                codomain = random_space(int(rng.integers(2, limit + 1)), int(rng.integers(2 ** 32)),
                                        config=self.config)
                T = random_map(domain, codomain, int(rng.integers(2 ** 32)))
            result = lifted_constants(T, all_subsets(domain), self.tol, self.processor)
            report.cases += result.pairs
            for note in result.hypothesis_notes:
                notes[note] = notes.get(note, 0) + 1
            for violation in result.violations:
                if violation["kind"] == kind:
                    report.add_violation(domain=domain.to_dict(), codomain=codomain.to_dict(),
                                         map=T.to_dict(), **violation)

            if kind == "expansive" and T.bijective:
                dualities += 1
                check = duality_check(T, tol=1e-9)
                if not (check.inverse_expansive_matches and check.inverse_lipschitz_matches):
                    report.add_violation(domain=domain.to_dict(), codomain=codomain.to_dict(),
                                         map=T.to_dict(), check="duality",
                                         forward=check.forward, inverse=check.inverse)
        report.details["hypothesis_notes"] = dict(sorted(notes.items()))
        if kind == "expansive":
            report.details["duality_checks"] = dualities

    def _lift_lipschitz(self, report: SuiteReport, trials: int, rng, spaces):
        """H'(TA,TB) <= lipschitz_sup(T) * H(A,B) for exhaustive families and random maps."""
        self._lifted_suite(report, trials, rng, "lipschitz")

    def _lift_expansive(self, report: SuiteReport, trials: int, rng, spaces):
        """H'(TA,TB) >= expansive_inf(T) * H(A,B) for injective maps, plus inverse duality."""
        self._lifted_suite(report, trials, rng, "expansive")

    def _singleton_isometry(self, report: SuiteReport, trials: int, rng, spaces):
        """x -> {x} is an isometry and its lift preserves H exactly."""
        max_discrepancy = 0.0
        for space in spaces + self._small_spaces(trials, rng, kinds=("matrix", "euclidean")):
            T, singletons = singleton_embedding(space)
            if not np.array_equal(singletons.distance_matrix(), space.distance_matrix()):
                report.add_violation(space=space.to_dict(), check="point_isometry")
            if len(space) > self.config.EXHAUSTIVE_LIMIT:
                continue
            family = all_subsets(space)
            H = hausdorff_matrix(family)
            H_lift = hausdorff_matrix([lift_set(T, A) for A in family])
            diff = np.abs(H_lift - H)
            report.cases += diff.size
            worst = float(diff.max())
            max_discrepancy = max(max_discrepancy, worst)
            if worst != 0.0:
                i, j = np.unravel_index(int(np.argmax(diff)), diff.shape)
                report.add_violation(space=space.to_dict(), A=family[i].ids, B=family[j].ids,
                                     H=float(H[i, j]), H_lifted=float(H_lift[i, j]))
        report.details["max_discrepancy"] = max_discrepancy

    def _check_chain(self, report: SuiteReport, family, N: int) -> None:
        chain = chain_select(family, N, eps=self.config.DEFAULT_EPS)
        report.cases += len(chain.steps)
        for n, (step, gap, bound) in enumerate(zip(chain.steps, chain.gaps, chain.proof_bounds), start=1):
            if not (leq(step, gap, self.tol) and leq(gap, bound, self.tol)):
                report.add_violation(family=family.label, params=family.params, n=n,
                                     step=step, gap=gap, proof_bound=bound)
        for escape in escape_bounds(family, N):
            report.cases += 1
            if not escape.holds:
                report.add_violation(family=family.label, params=family.params, check="escape_isolation",
                                     **escape.to_dict())

    def _chain_bounds(self, report: SuiteReport, trials: int, rng, spaces):
        """Chain steps <= H_n <= H_n + eps^n and I(x_n) <= d^(K_n) at escaping points, on every gallery
        and on random nested families."""
        for spec in default_galleries():
            family = build_gallery(spec, self.config).family
            self._check_chain(report, family, min(family.max_horizon, 12))
        for _ in range(trials):
            family = random_nested_family(10, 8, int(rng.integers(2 ** 32)), config=self.config)
            self._check_chain(report, family, 8)

        # on shrinking intervals the chain ends within one cell of 0 once 1/N <= pitch
        pitch, N = 0.05, 20
        family = shrinking_intervals(pitch, N, config=self.config)
        chain = chain_select(family, N, eps=self.config.DEFAULT_EPS, with_isolation=False)
        terminal = float(family.space.coords[chain.indices[-1], 0])
        report.details["shrinking_terminal"] = terminal
        report.cases += 1
        if not leq(abs(terminal), pitch, self.tol):
            report.add_violation(family=family.label, check="terminal_point", terminal=terminal, pitch=pitch)

    def _nesting(self, report: SuiteReport, trials: int, rng, spaces):
        """Every gallery and every lifted random family passes the nesting validator."""
        families = [build_gallery(spec, self.config).family for spec in default_galleries()]
        for _ in range(trials):
            family = random_nested_family(8, 8, int(rng.integers(2 ** 32)), config=self.config)
            T, _ = singleton_embedding(family.space)
            families.extend([family, lift_family(T, family)])
        for family in families:
            report.cases += 1
            try:
                family.validate(family.max_horizon)
            except NestingViolationError as e:
                report.add_violation(family=family.label, params=family.params, index=e.index)
