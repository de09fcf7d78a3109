"""
The induced set map A -> {Tx : x in A}, set spaces over a base space, and the
Lipschitz / expansive constants of point maps and of their lifts.
"""

import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.core.config import Config, DEFAULT_CONFIG
from src.core.errors import AmbientMismatchError, DomainError
from src.data.models import FiniteMetricSpace, PointMap, PointSet, SetSpace
from src.processors.metric_core import hausdorff_matrix
from src.processors.parallel_processor import ParallelProcessor
from src.processors.sequences import NestedFamily
from src.utils.helpers import leq, log_processing_stats

logger = logging.getLogger(__name__)


def lift_set(T: PointMap, A: PointSet) -> PointSet:
    """The image {Tx : x in A} as a PointSet of the codomain."""
    if A.space is not T.domain:
        raise AmbientMismatchError("Set does not live in the map's domain")
    return PointSet(T.codomain, T.image(A.members))


def distinct_sets(family: Sequence[PointSet]) -> List[PointSet]:
    """Drop repeated sets, keeping first occurrences in order."""
    seen = set()
    unique = []
    for A in family:
        if A not in seen:
            seen.add(A)
            unique.append(A)
    return unique


def build_set_space(base: FiniteMetricSpace, family: Sequence[PointSet],
                    label: Optional[str] = None) -> SetSpace:
    """A finite space whose points are the family's sets, at Hausdorff distance."""
    if not family:
        raise DomainError("A set space needs a nonempty family")
    for A in family:
        if A.space is not base:
            raise AmbientMismatchError("Family member does not live in the base space")
    elements = distinct_sets(family)
    if len(elements) < len(family):
        logger.warning(f"Collapsed {len(family) - len(elements)} duplicate sets in set-space family")
    return SetSpace(base, elements, hausdorff_matrix(elements), label=label)


def all_subsets(space: FiniteMetricSpace) -> List[PointSet]:
    """Every nonempty subset, ordered by size then lexicographically."""
    n = len(space)
    return [PointSet(space, combo)
            for size in range(1, n + 1)
            for combo in itertools.combinations(range(n), size)]


def random_family(space: FiniteMetricSpace, size: int, seed: int) -> List[PointSet]:
    """A seeded family of distinct random nonempty subsets."""
    rng = np.random.default_rng(seed)
    n = len(space)
    limit = min(size, 2 ** min(n, 62) - 1)
    family, seen = [], set()
    while len(family) < limit:
        mask = rng.random(n) < rng.uniform(0.1, 0.9)
        if not mask.any():
            mask[rng.integers(n)] = True
        A = PointSet(space, np.flatnonzero(mask))
        if A not in seen:
            seen.add(A)
            family.append(A)
    return family


def default_family(space: FiniteMetricSpace, config: Optional[Config] = None,
                   seed: Optional[int] = None) -> List[PointSet]:
    """All subsets for small spaces, otherwise a seeded random family."""
    config = config or DEFAULT_CONFIG
    if len(space) <= config.EXHAUSTIVE_LIMIT:
        return all_subsets(space)
    return random_family(space, config.RANDOM_FAMILY_SIZE,
                         config.DEFAULT_SEED if seed is None else seed)


def random_map(domain: FiniteMetricSpace, codomain: FiniteMetricSpace, seed: int,
               injective: bool = False) -> PointMap:
    """A seeded random map table; injective draws need |codomain| >= |domain|."""
    rng = np.random.default_rng(seed)
    if injective:
        if len(codomain) < len(domain):
            raise DomainError("An injective map needs a codomain at least as large as the domain")
        table = rng.permutation(len(codomain))[:len(domain)]
    else:
        table = rng.integers(0, len(codomain), size=len(domain))
    return PointMap(domain, codomain, table)


@dataclass
class MapConstants:
    """Extreme distance ratios rho(Tx,Ty)/d(x,y) over distinct pairs."""

    lipschitz_sup: float
    expansive_inf: float
    pairs: int
    sup_witness: Tuple[str, str] = ("", "")
    inf_witness: Tuple[str, str] = ("", "")

    @property
    def expansive(self) -> bool:
        return self.expansive_inf > 0


def map_constants(T: PointMap) -> MapConstants:
    """Exact max/min of distance ratios over all unordered pairs x != y."""
    n = len(T.domain)
    if n < 2:
        raise DomainError("Map constants need a domain with at least two points")
    D = T.domain.distance_matrix()
    R = T.codomain.block(T.table, T.table)
    iu, ju = np.triu_indices(n, 1)
    ratios = R[iu, ju] / D[iu, ju]
    k_max, k_min = int(np.argmax(ratios)), int(np.argmin(ratios))
    ids = T.domain.ids
    return MapConstants(
        lipschitz_sup=float(ratios[k_max]),
        expansive_inf=float(ratios[k_min]),
        pairs=int(ratios.size),
        sup_witness=(ids[iu[k_max]], ids[ju[k_max]]),
        inf_witness=(ids[iu[k_min]], ids[ju[k_min]]),
    )


@dataclass
class LiftedConstants:
    """Ratios H'(TA,TB)/H(A,B) over distinct family pairs, against the point constants."""

    lipschitz_sup: float
    expansive_inf: float
    pairs: int
    point_constants: MapConstants
    lipschitz_preserved: bool
    expansive_preserved: bool
    violations: List[dict] = field(default_factory=list)
    hypothesis_notes: List[str] = field(default_factory=list)

    @property
    def satisfied(self) -> bool:
        return self.lipschitz_preserved and self.expansive_preserved


def lifted_constants(T: PointMap, family: Sequence[PointSet], tol: float = 1e-12,
                     processor: Optional[ParallelProcessor] = None) -> LiftedConstants:
    """Compare the lift's distance ratios with the point map's constants.

    The contract checked here is sup <= lipschitz_sup(T) and inf >= expansive_inf(T),
    pair by pair: H'(TA,TB) <= l*H(A,B) and H'(TA,TB) >= k*H(A,B).
    """
    start_time = time.time()
    family = distinct_sets(family)
    if len(family) < 2:
        raise DomainError("Lifted constants need at least two distinct sets")
    for A in family:
        if A.space is not T.domain:
            raise AmbientMismatchError("Family member does not live in the map's domain")

    point = map_constants(T)
    H = hausdorff_matrix(family)
    images = [lift_set(T, A) for A in family]
    H_lift = hausdorff_matrix(images)

    iu, ju = np.triu_indices(len(family), 1)
    base, lifted = H[iu, ju], H_lift[iu, ju]
    ratios = lifted / base

    def scan(ks) -> List[dict]:
        found = []
        for k in ks:
            upper, lower = point.lipschitz_sup * base[k], point.expansive_inf * base[k]
            kind = None
            if not leq(lifted[k], upper, tol):
                kind = "lipschitz"
            elif not leq(lower, lifted[k], tol):
                kind = "expansive"
            if kind:
                found.append({
                    "kind": kind,
                    "A": family[iu[k]].ids, "B": family[ju[k]].ids,
                    "H": float(base[k]), "H_lifted": float(lifted[k]),
                    "lipschitz_sup": point.lipschitz_sup, "expansive_inf": point.expansive_inf,
                })
        return found

    # pair loop in order-preserving chunks
    processor = processor or ParallelProcessor(T.domain.config)
    chunks = ParallelProcessor.split(np.arange(ratios.size), processor.max_workers)
    violations = [v for part in processor.map_chunks(scan, chunks) for v in part]

    notes = []
    image_sets = set(images)
    if not T.injective:
        notes.append("map is not injective: expansive_inf is 0 and the lifted lower bound is trivial")
    if not T.surjective:
        notes.append("map is not surjective onto its codomain")
    if isinstance(T.codomain, SetSpace) and len(image_sets) < len(family):
        notes.append("lift is not injective on the family")

    sup_ratio, inf_ratio = float(ratios.max()), float(ratios.min())
    result = LiftedConstants(
        lipschitz_sup=sup_ratio,
        expansive_inf=inf_ratio,
        pairs=int(ratios.size),
        point_constants=point,
        lipschitz_preserved=not any(v["kind"] == "lipschitz" for v in violations),
        expansive_preserved=not any(v["kind"] == "expansive" for v in violations),
        violations=violations,
        hypothesis_notes=notes,
    )
    log_processing_stats("Lifted constants", int(ratios.size), "pairs", time.time() - start_time)
    return result


def singleton_embedding(space: FiniteMetricSpace) -> Tuple[PointMap, SetSpace]:
    """The map x -> {x} onto the set space of all singletons (a surjective isometry)."""
    singletons = [space.singleton(k) for k in range(len(space))]
    set_space = build_set_space(space, singletons, label="singletons")
    return PointMap(space, set_space, np.arange(len(space))), set_space


@dataclass
class DualityCheck:
    """For bijective T: expansive_inf(T^-1) against 1/lipschitz_sup(T), and the reverse."""

    forward: MapConstants
    inverse: MapConstants
    inverse_expansive_matches: bool
    inverse_lipschitz_matches: bool


def duality_check(T: PointMap, tol: float = 1e-12) -> DualityCheck:
    """A bijective map with Lipschitz constant l has an inverse expansive with constant 1/l."""
    inverse = T.inverse()
    forward, backward = map_constants(T), map_constants(inverse)

    def matches(a: float, b: float) -> bool:
        return abs(a - b) <= tol * max(1.0, abs(a), abs(b))

    reciprocal_sup = 1.0 / forward.lipschitz_sup if forward.lipschitz_sup > 0 else math.inf
    reciprocal_inf = 1.0 / forward.expansive_inf if forward.expansive_inf > 0 else math.inf
    return DualityCheck(
        forward=forward,
        inverse=backward,
        inverse_expansive_matches=matches(backward.expansive_inf, reciprocal_sup),
        inverse_lipschitz_matches=matches(backward.lipschitz_sup, reciprocal_inf),
    )


def lift_family(T: PointMap, family: NestedFamily) -> NestedFamily:
    """The elementwise image family T(K_1), T(K_2), ... over the codomain."""
    if family.space is not T.domain:
        raise AmbientMismatchError("Family does not live in the map's domain")
    limit = lift_set(T, family.limit) if family.limit is not None else None
    return NestedFamily(
        space=T.codomain,
        generator=lambda n: lift_set(T, family.at(n)),
        label=f"lift({family.label})",
        params={**family.params, "lifted": True},
        limit=limit,
        max_horizon=family.max_horizon,
    )
