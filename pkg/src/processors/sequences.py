"""
Decreasing set sequences K_1 >= K_2 >= ... over one ambient space.

Gap series H_n = H(K_n, K_{n+1}), the nearest-point chain a_n in K_n, extraction
of absolutely convergent subsequences from a Cauchy modulus, truncated
intersections and a labeled heuristic for the summability of H_n.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from src.core.config import Config, DEFAULT_CONFIG
from src.core.errors import DomainError, NestingViolationError
from src.data.models import FiniteMetricSpace, PointSet
from src.processors.metric_core import (
    diameter,
    gap_functional,
    hausdorff,
    isolation,
    nearest_member,
)
from src.processors.parallel_processor import ParallelProcessor
from src.utils.helpers import leq, log_processing_stats

logger = logging.getLogger(__name__)

SUMMABLE = "summable-looking"
DIVERGING = "diverging-looking"
INCONCLUSIVE = "inconclusive"


class NestedFamily:
    """A lazily generated decreasing family K_1 >= K_2 >= ... with provenance.

    ``generator(n)`` must be pure in n. ``limit`` is the intended limit set when it
    is known at truncation; ``analytic_gap(n)`` the closed-form H_n when known.
    """

    def __init__(self, space: FiniteMetricSpace, generator: Callable[[int], PointSet], label: str,
                 params: Optional[Dict[str, Any]] = None, limit: Optional[PointSet] = None,
                 max_horizon: Optional[int] = None,
                 analytic_gap: Optional[Callable[[int], float]] = None,
                 region: Optional[Callable[[int, Any], bool]] = None):
        self.space = space
        self.generator = generator
        self.label = label
        self.params = dict(params or {})
        self.limit = limit
        self.max_horizon = max_horizon
        self.analytic_gap = analytic_gap
        self.region = region
        self._cache: Dict[int, PointSet] = {}

    @classmethod
    def from_sets(cls, space: FiniteMetricSpace, sets: Sequence[PointSet], label: str = "explicit",
                  **kwargs) -> "NestedFamily":
        sets = list(sets)
        return cls(space, lambda n: sets[n - 1], label, max_horizon=len(sets), **kwargs)

    def __repr__(self) -> str:
        return f"<NestedFamily '{self.label}' {self.params}>"

    def at(self, n: int) -> PointSet:
        """K_n, 1-based."""
        if n < 1:
            raise DomainError(f"Family index must be >= 1, got {n}")
        if self.max_horizon is not None and n > self.max_horizon:
            raise DomainError(f"Family '{self.label}' is only defined up to n={self.max_horizon}")
        K = self._cache.get(n)
        if K is None:
            K = self.generator(n)
            if K.space is not self.space:
                raise DomainError(f"K_{n} of '{self.label}' does not live in the family's space")
            self._cache[n] = K
        return K

    def sets(self, N: int) -> List[PointSet]:
        return [self.at(n) for n in range(1, N + 1)]

    def validate(self, N: int):
        """Raise NestingViolationError at the first n with K_{n+1} not inside K_n."""
        for n in range(1, N):
            if not self.at(n + 1).issubset(self.at(n)):
                raise NestingViolationError(
                    f"Family '{self.label}' is not nested: K_{n + 1} is not a subset of K_{n}", index=n)


@dataclass
class GapSeries:
    horizon: int
    gaps: List[float]
    partial_sums: List[float]
    diameters: List[float]
    dhat: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"horizon": self.horizon, "gaps": self.gaps, "partial_sums": self.partial_sums,
                "diameters": self.diameters, "dhat": self.dhat}


def gap_series(family: NestedFamily, N: int, processor: Optional[ParallelProcessor] = None,
               with_dhat: bool = True) -> GapSeries:
    """Exact H-gaps, partial sums, diameters and d^(K_n) for n <= N."""
    if N < 2:
        raise DomainError(f"Gap series needs a horizon N >= 2, got {N}")
    start_time = time.time()
    family.validate(N)
    K = family.sets(N)
    processor = processor or ParallelProcessor(family.space.config)

    gaps = processor.map_chunks(lambda n: hausdorff(K[n], K[n + 1]), list(range(N - 1)))
    diameters = processor.map_chunks(lambda n: diameter(K[n]), list(range(N)))
    dhat = processor.map_chunks(lambda n: gap_functional(K[n]), list(range(N))) if with_dhat else []
    partial_sums = np.cumsum(gaps).tolist()

    log_processing_stats(f"Gap series for '{family.label}'", N, "sets", time.time() - start_time)
    return GapSeries(N, [float(g) for g in gaps], partial_sums,
                     [float(d) for d in diameters], [float(d) for d in dhat])


@dataclass
class Chain:
    """Points a_n in K_n with their steps and both step bounds."""

    eps: float
    indices: List[int]
    points: List[str]
    steps: List[float]
    gaps: List[float]
    proof_bounds: List[float]
    isolation: List[float] = field(default_factory=list)

    @property
    def step_sum(self) -> float:
        return float(sum(self.steps))

    def bounds_hold(self, tol: float = 1e-12) -> bool:
        return all(leq(s, g, tol) and leq(g, b, tol)
                   for s, g, b in zip(self.steps, self.gaps, self.proof_bounds))

    def to_dict(self) -> dict:
        return {"eps": self.eps, "points": self.points, "steps": self.steps, "gaps": self.gaps,
                "proof_bounds": self.proof_bounds, "isolation": self.isolation,
                "step_sum": self.step_sum, "bounds_hold": self.bounds_hold()}


def chain_select(family: NestedFamily, N: int, eps: float = 0.5,
                 series: Optional[GapSeries] = None, with_isolation: bool = True) -> Chain:
    """Greedy chain: a_1 = lowest index of K_1, a_{n+1} = nearest point of K_{n+1} to a_n.

    Each step is at most d^->(K_n, K_{n+1}) <= H_n, which is within the
    existential bound H_n + eps^n; both bounds are recorded.
    """
    if not 0 < eps < 1:
        raise DomainError(f"Chain eps must lie in (0,1), got {eps}")
    family.validate(N)
    K = family.sets(N)
    if series is None or series.horizon < N:
        gaps = [hausdorff(K[n], K[n + 1]) for n in range(N - 1)]
    else:
        gaps = series.gaps[:N - 1]

    indices = [int(K[0].members[0])]
    steps = []
    for n in range(1, N):
        nxt, step = nearest_member(indices[-1], K[n])
        indices.append(nxt)
        steps.append(step)

    proof_bounds = [g + eps ** (n + 1) for n, g in enumerate(gaps)]
    space = family.space
    isolations = [isolation(a, space) for a in indices] if with_isolation and len(space) > 1 else []
    chain = Chain(eps, indices, [space.ids[a] for a in indices], steps, list(gaps), proof_bounds, isolations)
    if not chain.bounds_hold(space.config.TOLERANCE):
        logger.error(f"Chain step exceeded its gap bound on '{family.label}'")
    return chain


@dataclass
class EscapeBound:
    """The first point x_n of K_n leaving at step n, with I(x_n) against d^(K_n)."""

    n: int
    point: Optional[str]
    isolation: Optional[float]
    dhat: float
    holds: bool

    def to_dict(self) -> dict:
        return {"n": self.n, "point": self.point, "isolation": self.isolation,
                "dhat": self.dhat, "holds": self.holds}


def escape_bounds(family: NestedFamily, N: int, series: Optional[GapSeries] = None) -> List[EscapeBound]:
    """I(x_n) <= d(x_n, X-K_n) <= d^(K_n) at the lowest-index x_n in K_n - K_{n+1}, for n < N.

    Steps where nothing leaves record no point and hold trivially.
    """
    family.validate(N)
    K = family.sets(N)
    space = family.space
    tol = space.config.TOLERANCE
    if series is not None and len(series.dhat) >= N:
        dhat = series.dhat[:N]
    else:
        dhat = [gap_functional(S) for S in K]

    bounds = []
    for n in range(1, N):
        leaving = np.flatnonzero(K[n - 1].mask & ~K[n].mask)
        if leaving.size == 0 or len(space) < 2:
            bounds.append(EscapeBound(n, None, None, float(dhat[n - 1]), True))
            continue
        x = int(leaving[0])
        I = isolation(x, space)
        bounds.append(EscapeBound(n, space.ids[x], I, float(dhat[n - 1]), leq(I, dhat[n - 1], tol)))
    failed = [b.n for b in bounds if not b.holds]
    if failed:
        logger.error(f"Isolation of an escaping point exceeded d^(K_n) on '{family.label}' at n={failed}")
    return bounds


@dataclass
class Extraction:
    """An extracted subsequence x_{N_1}, x_{N_2}, ... with its step budget."""

    positions: List[int]
    points: List[str]
    steps: List[float]
    schedule: List[float]
    truncated: bool
    modulus_verified: Optional[bool] = None

    @property
    def step_sum(self) -> float:
        return float(sum(self.steps))

    @property
    def schedule_sum(self) -> float:
        return float(sum(self.schedule))

    @property
    def within_bound(self) -> bool:
        return self.step_sum <= self.schedule_sum

    def to_dict(self) -> dict:
        return {"positions": self.positions, "points": self.points, "steps": self.steps,
                "schedule": self.schedule, "truncated": self.truncated,
                "modulus_verified": self.modulus_verified, "step_sum": self.step_sum,
                "schedule_sum": self.schedule_sum, "within_bound": self.within_bound}


def geometric_schedule(n: int) -> float:
    return 2.0 ** -n


def _tail_diameters(D: np.ndarray) -> np.ndarray:
    """td[j] = max over m, k >= j of D[m, k]."""
    L = D.shape[0]
    td = np.zeros(L)
    running = 0.0
    for j in range(L - 1, -1, -1):
        running = max(running, float(D[j, j:].max()))
        td[j] = running
    return td


def extract_abs_convergent_subsequence(space: FiniteMetricSpace, seq: Sequence[int],
                                       modulus: Callable[[float], int],
                                       schedule: Union[Callable[[int], float], Sequence[float], None] = None,
                                       max_terms: int = 64) -> Extraction:
    """Pick N_n = modulus(p_n), forced strictly increasing, from a Cauchy modulus.

    Positions are 0-based indices into ``seq``; the modulus maps eps to the
    position after which all terms are within eps of each other.
    """
    seq = np.asarray(seq, dtype=np.intp)
    if schedule is None:
        schedule = geometric_schedule
    if not callable(schedule):
        values = list(schedule)
        schedule = lambda n: values[n - 1]  # noqa: E731
        max_terms = min(max_terms, len(values))

    positions: List[int] = []
    used: List[float] = []
    truncated = False
    previous_p = math.inf
    for n in range(1, max_terms + 1):
        p = float(schedule(n))
        if not (0 < p < previous_p):
            raise DomainError(f"Schedule must be positive and strictly decreasing (p_{n} = {p})")
        previous_p = p
        pick = int(modulus(p))
        if positions:
            pick = max(pick, positions[-1] + 1)
        if pick >= seq.size:
            truncated = True
            logger.info(f"Modulus reached past the available prefix at term {n} (position {pick})")
            break
        positions.append(max(pick, 0))
        used.append(p)

    picked = seq[positions]
    steps = [space.distance(int(a), int(b)) for a, b in zip(picked[:-1], picked[1:])]

    modulus_verified = None
    if 0 < seq.size <= space.config.MAX_POINTS:
        td = _tail_diameters(space.block(seq, seq))
        modulus_verified = all(td[pos] < p for pos, p in zip(positions, used))

    return Extraction(positions, [space.ids[int(k)] for k in picked], steps, used[:max(len(positions) - 1, 0)],
                      truncated, modulus_verified)


@dataclass
class PrefixVerdict:
    step_sum: float
    budget: float
    verdict: str
    cauchy_consistent: bool

    @property
    def within_budget(self) -> bool:
        return self.verdict == "within-budget"


def is_absolutely_convergent_prefix(space: FiniteMetricSpace, seq: Sequence[int], budget: float,
                                    tol: float = 1e-12) -> PrefixVerdict:
    """Sum of consecutive steps against a budget, plus the tail-sum Cauchy estimate.

    The estimate max over m,k >= j of d(x_m, x_k) <= sum of steps from j on is a
    consequence of the triangle inequality and is checked for every j.
    """
    seq = np.asarray(seq, dtype=np.intp)
    if seq.size < 2:
        raise DomainError("A prefix needs at least two terms")
    D = space.block(seq, seq)
    steps = D[np.arange(seq.size - 1), np.arange(1, seq.size)]
    step_sum = float(steps.sum())
    tail_sums = np.concatenate([np.cumsum(steps[::-1])[::-1], [0.0]])
    td = _tail_diameters(D)
    consistent = all(leq(float(td[j]), float(tail_sums[j]), tol) for j in range(seq.size))
    verdict = "within-budget" if step_sum <= budget else "exceeded"
    return PrefixVerdict(step_sum, float(budget), verdict, consistent)


def truncated_intersection(family: NestedFamily, N: int) -> PointSet:
    """The literal intersection of K_1..K_N; equals K_N by nesting."""
    family.validate(N)
    mask = np.ones(len(family.space), dtype=bool)
    for K in family.sets(N):
        mask &= K.mask
    result = PointSet(family.space, np.flatnonzero(mask))
    if result != family.at(N):
        raise NestingViolationError(
            f"Intersection of K_1..K_{N} of '{family.label}' differs from K_{N}", index=N)
    return result


def convergence_to_intersection(family: NestedFamily, N: int, K_limit: PointSet) -> List[float]:
    """H(K_n, K_limit) for n <= N; K_limit must sit inside every K_n."""
    family.validate(N)
    distances = []
    for n, K in enumerate(family.sets(N), start=1):
        if not K_limit.issubset(K):
            raise NestingViolationError(f"Intended limit is not contained in K_{n}", index=n)
        distances.append(hausdorff(K, K_limit))
    return distances


def singleton_distances(family: NestedFamily, N: int, x: int) -> List[float]:
    """H({x}, K_n) for n <= N."""
    point = family.space.singleton(x)
    return [hausdorff(point, K) for K in family.sets(N)]


def tail_family(space: FiniteMetricSpace, seq: Sequence[int], label: str = "tails") -> NestedFamily:
    """U_i = {x_i, x_{i+1}, ...}: the tail sets of a sequence, a nested family."""
    seq = np.asarray(seq, dtype=np.intp)
    if seq.size == 0:
        raise DomainError("Tail family needs a nonempty sequence")
    return NestedFamily(space, lambda n: PointSet(space, seq[n - 1:]), label,
                        params={"length": int(seq.size)}, max_horizon=int(seq.size))


def summability_verdict(gaps: Sequence[float], tol: float, config: Optional[Config] = None):
    """Heuristic: log-log slope of the gap tail against the c/n^1.1 and c/n references.

    Returns (verdict, slope). Convergence of a series is undecidable from finitely
    many terms; callers must present this as a heuristic.
    """
    config = config or DEFAULT_CONFIG
    g = np.asarray(gaps, dtype=np.float64)
    start = len(g) // 2 if len(g) >= 6 else 0
    tail = g[start:]
    ns = np.arange(start + 1, len(g) + 1, dtype=np.float64)
    if tail.size == 0:
        return INCONCLUSIVE, math.nan
    if np.all(tail <= tol):
        return SUMMABLE, -math.inf
    positive = tail > tol
    if positive.sum() < 3:
        return INCONCLUSIVE, math.nan
    slope = float(np.polyfit(np.log(ns[positive]), np.log(tail[positive]), 1)[0])
    if slope <= config.SUMMABLE_SLOPE:
        return SUMMABLE, slope
    if slope >= config.DIVERGENT_SLOPE:
        return DIVERGING, slope
    return INCONCLUSIVE, slope


@dataclass
class ClassificationReport:
    label: str
    params: Dict[str, Any]
    horizon: int
    diameter_initial: float
    diameter_at_horizon: float
    diameter_monotone: bool
    gap_at_horizon: float
    gap_tail_slope: float
    partial_sum: float
    verdict: str
    verdict_basis: str
    truncated_intersection: List[str]
    truncated_intersection_size: int
    nonempty_at_truncation: bool
    convergence_to_intersection: float
    dhat_at_horizon: float
    chain_terminal_point: str
    chain_terminal_step: float
    chain_bounds_hold: bool
    escape_bounds_hold: bool
    limit_distances: Optional[List[float]]
    series: GapSeries
    chain: Chain
    escapes: List[EscapeBound]

    def rows(self) -> List[Dict[str, Any]]:
        """One row per n for CSV output."""
        rows = []
        for n in range(1, self.horizon + 1):
            k = n - 1
            rows.append({
                "n": n,
                "H_n": self.series.gaps[k] if k < len(self.series.gaps) else None,
                "partial_sum": self.series.partial_sums[k] if k < len(self.series.partial_sums) else None,
                "delta_n": self.series.diameters[k],
                "chain_step": self.chain.steps[k] if k < len(self.chain.steps) else None,
                "dhat_n": self.series.dhat[k] if k < len(self.series.dhat) else None,
                "isolation_n": self.chain.isolation[k] if k < len(self.chain.isolation) else None,
            })
        return rows


def classify(family: NestedFamily, N: int, tol: Optional[float] = None, eps: float = 0.5,
             processor: Optional[ParallelProcessor] = None) -> ClassificationReport:
    """Populate a ClassificationReport for K_1..K_N.

    The report separates "nonempty at truncation" (always true for a finite
    nested family) from the heuristic summability verdict, which makes no claim
    about the limit.
    """
    if N < 4:
        raise DomainError(f"Classification needs N >= 4, got {N}")
    config = family.space.config
    tol = config.DEFAULT_TOL if tol is None else tol
    logger.info(f"Classifying '{family.label}' up to N={N}")

    series = gap_series(family, N, processor=processor)
    chain = chain_select(family, N, eps=eps, series=series)
    escapes = escape_bounds(family, N, series)
    intersection = truncated_intersection(family, N)
    verdict, slope = summability_verdict(series.gaps, tol, config)

    diameters = series.diameters
    monotone = all(leq(b, a, config.TOLERANCE) for a, b in zip(diameters, diameters[1:]))
    limit_distances = None
    if family.limit is not None:
        limit_distances = convergence_to_intersection(family, N, family.limit)

    return ClassificationReport(
        label=family.label,
        params=family.params,
        horizon=N,
        diameter_initial=diameters[0],
        diameter_at_horizon=diameters[-1],
        diameter_monotone=monotone,
        gap_at_horizon=series.gaps[-1],
        gap_tail_slope=slope,
        partial_sum=series.partial_sums[-1],
        verdict=verdict,
        verdict_basis="heuristic: tail log-log slope of H_n against c/n^1.1 (summable) and c/n (diverging)",
        truncated_intersection=intersection.ids,
        truncated_intersection_size=len(intersection),
        nonempty_at_truncation=len(intersection) > 0,
        convergence_to_intersection=hausdorff(family.at(N), intersection),
        dhat_at_horizon=series.dhat[-1] if series.dhat else math.nan,
        chain_terminal_point=chain.points[-1],
        chain_terminal_step=chain.steps[-1],
        chain_bounds_hold=chain.bounds_hold(config.TOLERANCE),
        escape_bounds_hold=all(b.holds for b in escapes),
        limit_distances=limit_distances,
        series=series,
        chain=chain,
        escapes=escapes,
    )
