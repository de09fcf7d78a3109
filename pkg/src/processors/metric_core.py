"""
Single-level set functionals on finite metric spaces.

Point-to-set distance, directed and full Hausdorff distance, neighborhoods,
diameter, complement, the gap functional d^(A) = sup_{x in A} d(x, X \\ A) and
the isolation functional I(x) = d(x, X \\ {x}).

Distances are binary floats. +infinity appears only as an inf/sup over the
empty set (complement of the full space).
"""

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from src.core.errors import DomainError
from src.data.models import (
    KD_TREE_THRESHOLD,
    EmptySet,
    FiniteMetricSpace,
    PointSet,
    require_in_space,
    require_same_space,
)
from src.processors.parallel_processor import ParallelProcessor
from src.utils.helpers import leq

logger = logging.getLogger(__name__)

AnySet = Union[PointSet, EmptySet]

# Minimum number of outer points per chunk before the sup loop is split.
PARALLEL_MIN_CHUNK = 2048


def dist_point_to_set(x: int, A: AnySet) -> float:
    """d(x, A) = min over y in A of d(x, y); +inf for the empty set."""
    require_in_space(x, A.space)
    if A.is_empty:
        return math.inf
    return float(A.space.block([x], A.members).min())


def nearest_member(x: int, A: PointSet) -> Tuple[int, float]:
    """Nearest member of A to x and its distance; ties go to the lowest index."""
    require_in_space(x, A.space)
    row = A.space.block([x], A.members)[0]
    k = int(np.argmin(row))  # members are sorted, so the first minimum has the lowest index
    return int(A.members[k]), float(row[k])


def _chunk_sup(chunk: np.ndarray, space: FiniteMetricSpace, targets: np.ndarray) -> float:
    serial = ParallelProcessor(space.config, workers=1)
    return float(space.nearest_distances(chunk, targets, processor=serial).max())


def directed_hausdorff(A: AnySet, B: AnySet, processor: Optional[ParallelProcessor] = None) -> float:
    """sup over x in A of d(x, B); 0 exactly when A is a subset of B."""
    space = require_same_space(A, B)
    if A.is_empty:
        return 0.0
    if B.is_empty:
        return math.inf
    if A.issubset(B):
        return 0.0
    if processor is not None and processor.parallel and len(A) >= 2 * PARALLEL_MIN_CHUNK:
        n_chunks = min(processor.max_workers * 4, len(A) // PARALLEL_MIN_CHUNK)
        chunks = processor.split(A.members, n_chunks)
        sups = processor.map_chunks(
            functools.partial(_chunk_sup, space=space, targets=B.members), chunks)
        return float(max(sups))
    return float(space.nearest_distances(A.members, B.members, processor=processor).max())


def hausdorff(A: AnySet, B: AnySet, processor: Optional[ParallelProcessor] = None) -> float:
    """H(A, B) = max of the two directed distances."""
    require_same_space(A, B)
    return max(directed_hausdorff(A, B, processor), directed_hausdorff(B, A, processor))


def neighborhood(A: PointSet, eps: float) -> PointSet:
    """N_eps(A): every point at distance strictly less than eps from some member of A."""
    if not eps > 0:
        raise DomainError(f"Neighborhood radius must be positive, got {eps}")
    space = A.space
    distances = space.nearest_distances(np.arange(len(space)), A.members)
    return PointSet(space, np.flatnonzero(distances < eps))


def closed_neighborhood(A: PointSet, r: float) -> PointSet:
    """Every point at distance at most r from some member of A."""
    if not r >= 0:
        raise DomainError(f"Closed neighborhood radius must be nonnegative, got {r}")
    space = A.space
    distances = space.nearest_distances(np.arange(len(space)), A.members)
    return PointSet(space, np.flatnonzero(distances <= r))


def _candidate_radii(A: PointSet, B: PointSet) -> np.ndarray:
    space = A.space
    if len(A) * len(B) <= KD_TREE_THRESHOLD:
        values = space.block(A.members, B.members).ravel()
    else:
        # the optimal radius is some d(x, B) or d(y, A), so these suffice
        values = np.concatenate([space.nearest_distances(A.members, B.members),
                                 space.nearest_distances(B.members, A.members)])
    return np.unique(np.concatenate([[0.0], values]))


def hausdorff_via_neighborhoods(A: PointSet, B: PointSet) -> float:
    """Smallest candidate radius r with A in closed-N_r(B) and B in closed-N_r(A).

    Computed from neighborhood containment alone; an independent oracle for hausdorff().
    """
    require_same_space(A, B)
    candidates = _candidate_radii(A, B)

    def feasible(r: float) -> bool:
        return A.issubset(closed_neighborhood(B, r)) and B.issubset(closed_neighborhood(A, r))

    lo, hi = 0, candidates.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(candidates[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(candidates[lo])


def _diameter_brute(space: FiniteMetricSpace, members: np.ndarray,
                    processor: Optional[ParallelProcessor] = None) -> float:
    processor = processor or ParallelProcessor(space.config)
    rows = processor.block_rows(members.size)
    chunks = [members[i:i + rows] for i in range(0, members.size, rows)]
    sups = processor.map_chunks(lambda chunk: float(space.block(chunk, members).max()), chunks)
    return float(max(sups))


def diameter(A: PointSet, processor: Optional[ParallelProcessor] = None) -> float:
    """delta(A) = max pairwise distance within A; 0 for singletons."""
    space = A.space
    if len(A) == 1:
        return 0.0
    if not space.is_coordinate or len(A) ** 2 <= KD_TREE_THRESHOLD:
        return _diameter_brute(space, A.members, processor)

    pts = space.coords[A.members]
    dim = pts.shape[1]
    if space.metric == "chebyshev":
        return float(np.ptp(pts, axis=0).max())
    if dim == 1:
        return float(np.ptp(pts[:, 0]))
    if space.metric == "manhattan" and dim <= 12:
        # max over sign patterns s of the spread of s . x
        signs = np.array(np.meshgrid(*([[1.0, -1.0]] * (dim - 1)), indexing="ij")).reshape(dim - 1, -1).T
        signs = np.hstack([np.ones((signs.shape[0], 1)), signs])
        return float(np.ptp(pts @ signs.T, axis=0).max())
    if space.metric == "euclidean" and dim <= 3:
        try:
            hull = ConvexHull(pts)
            return _diameter_brute(space, A.members[hull.vertices], processor)
        except QhullError:
            logger.debug("Degenerate hull, falling back to brute-force diameter")
    return _diameter_brute(space, A.members, processor)


def complement(A: AnySet) -> AnySet:
    """X \\ A; the full space complements to the flagged EmptySet."""
    space = A.space
    rest = np.flatnonzero(~A.mask)
    return PointSet(space, rest) if rest.size else EmptySet(space)


def gap_functional(A: PointSet) -> float:
    """d^(A) = max over x in A of d(x, X \\ A); +inf when A is the whole space."""
    rest = complement(A)
    if rest.is_empty:
        return math.inf
    return float(A.space.nearest_distances(A.members, rest.members).max())


def inscribed_radius_bound(A: PointSet) -> float:
    """min over y outside A of max over x in A of d(x, y).

    Always an upper bound for d^(A): every x in A is within this distance of the
    minimizing outside point.
    """
    rest = complement(A)
    if rest.is_empty:
        return math.inf
    space = A.space
    processor = ParallelProcessor(space.config)
    rows = processor.block_rows(len(A))
    chunks = [rest.members[i:i + rows] for i in range(0, len(rest), rows)]
    mins = processor.map_chunks(lambda chunk: float(space.block(chunk, A.members).max(axis=1).min()), chunks)
    return float(min(mins))


def isolation(x: int, space: FiniteMetricSpace) -> float:
    """I(x) = d(x, X \\ {x})."""
    if len(space) < 2:
        raise DomainError("Isolation is undefined on a single-point space")
    require_in_space(x, space)
    others = np.delete(np.arange(len(space)), x)
    return float(space.nearest_distances([x], others)[0])


@dataclass
class ClauseResult:
    clause: str
    statement: str
    applicable: bool
    vacuous: bool = False
    lhs: Optional[float] = None
    rhs: Optional[float] = None
    satisfied: bool = True
    orientation: str = "A,B"


@dataclass
class ComplementReport:
    """Both sides of each complement-Hausdorff inequality for one pair (A, B)."""

    A: List[str]
    B: List[str]
    hausdorff: float
    dhat_A: float
    dhat_B: float
    complement_hausdorff: Optional[float]
    clauses: List[ClauseResult] = field(default_factory=list)

    @property
    def satisfied(self) -> bool:
        return all(c.satisfied for c in self.clauses)

    def to_dict(self) -> dict:
        return {
            "A": self.A, "B": self.B, "hausdorff": self.hausdorff,
            "dhat_A": self.dhat_A, "dhat_B": self.dhat_B,
            "complement_hausdorff": self.complement_hausdorff,
            "clauses": self.clauses, "satisfied": self.satisfied,
        }


def complement_hausdorff_inequalities(A: PointSet, B: PointSet, tol: float = 1e-12) -> ComplementReport:
    """Evaluate the three complement inequalities for (A, B).

    (a) H(X\\A, X\\B) <= max(d^A, d^B)
    (b) max(d^A, d^B) <= H(A, B) when A and B are disjoint
    (c) H(X\\A, X\\B) <= d^B when A is a subset of B
    """
    require_same_space(A, B)
    dhat_a, dhat_b = gap_functional(A), gap_functional(B)
    h = hausdorff(A, B)
    comp_a, comp_b = complement(A), complement(B)
    complements_nonempty = not (comp_a.is_empty or comp_b.is_empty)
    h_comp = hausdorff(comp_a, comp_b) if complements_nonempty else None

    clauses = []
    bound = max(dhat_a, dhat_b)
    if complements_nonempty:
        clauses.append(ClauseResult("a", "H(X\\A,X\\B) <= max(dhat(A),dhat(B))", True,
                                    lhs=h_comp, rhs=bound, satisfied=leq(h_comp, bound, tol)))
    else:
        clauses.append(ClauseResult("a", "H(X\\A,X\\B) <= max(dhat(A),dhat(B))", True, vacuous=True))

    disjoint = A.intersection(B).is_empty
    if disjoint:
        clauses.append(ClauseResult("b", "max(dhat(A),dhat(B)) <= H(A,B)", True,
                                    lhs=bound, rhs=h, satisfied=leq(bound, h, tol)))
    else:
        clauses.append(ClauseResult("b", "max(dhat(A),dhat(B)) <= H(A,B)", False))

    statement = "H(X\\A,X\\B) <= dhat(B)"
    if A.issubset(B) or B.issubset(A):
        orientation, outer_dhat = ("A,B", dhat_b) if A.issubset(B) else ("B,A", dhat_a)
        if complements_nonempty:
            clauses.append(ClauseResult("c", statement, True, lhs=h_comp, rhs=outer_dhat,
                                        satisfied=leq(h_comp, outer_dhat, tol), orientation=orientation))
        else:
            clauses.append(ClauseResult("c", statement, True, vacuous=True, orientation=orientation))
    else:
        clauses.append(ClauseResult("c", statement, False))

    report = ComplementReport(A.ids, B.ids, h, dhat_a, dhat_b, h_comp, clauses)
    if not report.satisfied:
        logger.error(f"Complement inequality failed for A={A!r}, B={B!r}")
    return report


def hausdorff_matrix(family: Sequence[PointSet]) -> np.ndarray:
    """All-pairs H over a family of sets sharing one ambient space."""
    if not family:
        return np.zeros((0, 0))
    space = require_same_space(*family)
    union = np.unique(np.concatenate([A.members for A in family]))
    position = np.full(len(space), -1, dtype=np.intp)
    position[union] = np.arange(union.size)
    D = space.block(union, union)
    masks = np.zeros((len(family), union.size), dtype=bool)
    for k, A in enumerate(family):
        masks[k, position[A.members]] = True

    # to_set[b, x] = d(x, B_b)
    to_set = np.stack([np.where(mask[None, :], D, np.inf).min(axis=1) for mask in masks])
    # directed[a, b] = sup over x in A_a of d(x, B_b)
    directed = np.stack([np.where(mask[None, :], to_set, -np.inf).max(axis=1) for mask in masks])
    return np.maximum(directed, directed.T)


def check_metric_axioms(space: FiniteMetricSpace, tol: float = 1e-12, limit: int = 10) -> List[Dict]:
    """Violations of the metric axioms on a space's distance matrix (empty list when it is a metric)."""
    D = np.asarray(space.distance_matrix(), dtype=np.float64)
    n = D.shape[0]
    ids = space.ids
    scale = max(1.0, float(D.max())) if n else 1.0
    violations: List[Dict] = []

    def add(axiom: str, points, **values):
        if len(violations) < limit:
            violations.append({"axiom": axiom, "points": [ids[int(p)] for p in points], **values})

    for i, j in np.argwhere(D < 0):
        add("nonnegativity", (i, j), d=float(D[i, j]))
    for i in np.flatnonzero(np.diag(D) != 0):
        add("zero_self_distance", (i,), d=float(D[i, i]))
    off = ~np.eye(n, dtype=bool)
    for i, j in np.argwhere((D == 0) & off):
        if i < j:
            add("identity_of_indiscernibles", (i, j))
    for i, j in np.argwhere(np.abs(D - D.T) > tol * scale):
        if i < j:
            add("symmetry", (i, j), d_ij=float(D[i, j]), d_ji=float(D[j, i]))
    for k in range(n):
        bad = D > D[:, [k]] + D[[k], :] + tol * scale
        for i, j in np.argwhere(bad):
            add("triangle", (i, k, j), d_ij=float(D[i, j]), d_ik=float(D[i, k]), d_kj=float(D[k, j]))
            if len(violations) >= limit:
                return violations
    return violations
