"""
Domain models: finite metric spaces, point sets, point maps and set spaces.
"""

import functools
import logging
import math
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from src.core.config import Config, DEFAULT_CONFIG
from src.core.errors import (
    AmbientMismatchError,
    CapacityError,
    DomainError,
    MalformedInputError,
)
from src.processors.parallel_processor import ParallelProcessor

logger = logging.getLogger(__name__)

COORDINATE_METRICS = ("euclidean", "manhattan", "chebyshev", "minkowski")
NAMED_METRICS = COORDINATE_METRICS + ("discrete",)

# Above this many source x target pairs, coordinate spaces answer nearest-point
# queries with an exact k-d tree instead of dense distance blocks.
KD_TREE_THRESHOLD = 4_000_000
# Blocks up to this many entries are computed in one shot.
SMALL_BLOCK = 65_536


class FiniteMetricSpace:
    """A finite set of points with a total pairwise distance.

    The metric is either a named coordinate metric over ``coords`` or an explicit
    symmetric distance matrix, validated against the metric axioms on construction.
    """

    def __init__(self, ids: Sequence[str], *, coords=None, metric: str = "euclidean",
                 p: Optional[float] = None, matrix=None, validate: bool = True,
                 config: Optional[Config] = None, label: Optional[str] = None):
        self.config = config or DEFAULT_CONFIG
        self.ids = tuple(str(i) for i in ids)
        self.label = label
        if not self.ids:
            raise DomainError("A metric space needs at least one point")
        self._index: Dict[str, int] = {}
        for k, point_id in enumerate(self.ids):
            if point_id in self._index:
                raise MalformedInputError(f"Duplicate point id '{point_id}'", field=f"points[{k}].id")
            self._index[point_id] = k

        self.coords = None
        self.matrix = None
        self.p = None

        if matrix is not None:
            self.metric = "matrix"
            self.matrix = np.array(matrix, dtype=np.float64)
            self.matrix.flags.writeable = False
            if len(self.ids) > self.config.MAX_POINTS:
                raise CapacityError(f"Matrix space has {len(self.ids)} points, cap is "
                                    f"{self.config.MAX_POINTS} (HAUSLAB_MAX_POINTS)")
            if validate:
                self._validate_matrix()
        else:
            self.metric, self.p = self._normalize_metric(metric, p)
            if len(self.ids) > self.config.MAX_GRID_POINTS:
                raise CapacityError(f"Coordinate space has {len(self.ids)} points, cap is "
                                    f"{self.config.MAX_GRID_POINTS} (HAUSLAB_MAX_GRID_POINTS)")
            if coords is not None:
                self.coords = np.array(coords, dtype=np.float64)
                if self.coords.ndim == 1:
                    self.coords = self.coords[:, None]
                self.coords.flags.writeable = False
            if self.metric != "discrete":
                self._validate_coords(validate)

    # ------------------------------------------------------------------
    # construction helpers
    # ------------------------------------------------------------------

    @staticmethod
    def _normalize_metric(metric: str, p: Optional[float]):
        if metric not in NAMED_METRICS:
            raise MalformedInputError(f"Unknown metric '{metric}'", field="metric")
        if metric == "minkowski":
            if p is None or not p >= 1:
                raise DomainError(f"Minkowski metric needs p >= 1, got {p}")
            if math.isinf(p):
                return "chebyshev", None
            if p == 1:
                return "manhattan", None
            if p == 2:
                return "euclidean", None
            return "minkowski", float(p)
        return metric, None

    def _validate_coords(self, validate: bool):
        if self.coords is None:
            raise MalformedInputError(f"Metric '{self.metric}' needs coordinates", field="points")
        if self.coords.shape[0] != len(self.ids):
            raise MalformedInputError("Coordinate rows do not match point count", field="points")
        if not np.all(np.isfinite(self.coords)):
            bad = int(np.argwhere(~np.isfinite(self.coords))[0][0])
            raise MalformedInputError("Coordinates must be finite reals", field=f"points[{bad}].coords")
        if validate:
            unique_rows = np.unique(self.coords, axis=0)
            if unique_rows.shape[0] != self.coords.shape[0]:
                raise MalformedInputError("Two distinct points share coordinates (distance 0)",
                                          field="points")

    def _validate_matrix(self):
        D = self.matrix
        n = len(self.ids)
        tol = self.config.TOLERANCE
        if D.shape != (n, n):
            raise MalformedInputError(f"Distance matrix must be {n}x{n}, got {D.shape}", field="metric.matrix")
        if not np.all(np.isfinite(D)):
            i, j = np.argwhere(~np.isfinite(D))[0]
            raise MalformedInputError("Distances must be finite", field=f"metric.matrix[{i}][{j}]")
        if np.any(D < 0):
            i, j = np.argwhere(D < 0)[0]
            raise MalformedInputError("Distances must be nonnegative", field=f"metric.matrix[{i}][{j}]")
        if np.any(np.diag(D) != 0):
            i = int(np.argwhere(np.diag(D) != 0)[0][0])
            raise MalformedInputError("d(p,p) must be 0", field=f"metric.matrix[{i}][{i}]")
        scale = max(1.0, float(D.max()))
        asym = np.abs(D - D.T) > tol * scale
        if np.any(asym):
            i, j = np.argwhere(asym)[0]
            raise MalformedInputError("Distance matrix is not symmetric", field=f"metric.matrix[{i}][{j}]",
                                      witness={"axiom": "symmetry", "points": [self.ids[i], self.ids[j]]})
        off = ~np.eye(n, dtype=bool)
        if np.any((D == 0) & off):
            i, j = np.argwhere((D == 0) & off)[0]
            raise MalformedInputError("Distinct points at distance 0", field=f"metric.matrix[{i}][{j}]",
                                      witness={"axiom": "identity", "points": [self.ids[i], self.ids[j]]})
        for k in range(n):
            bad = D > D[:, [k]] + D[[k], :] + tol * scale
            if np.any(bad):
                i, j = np.argwhere(bad)[0]
                raise MalformedInputError(
                    "Distance matrix violates the triangle inequality",
                    field=f"metric.matrix[{i}][{j}]",
                    witness={"axiom": "triangle", "points": [self.ids[i], self.ids[k], self.ids[j]],
                             "d_ij": float(D[i, j]), "d_ik": float(D[i, k]), "d_kj": float(D[k, j])})

    @classmethod
    def from_matrix(cls, ids: Sequence[str], matrix, **kwargs) -> "FiniteMetricSpace":
        return cls(ids, matrix=matrix, **kwargs)

    @classmethod
    def from_coords(cls, coords, metric: str = "euclidean", ids: Optional[Sequence[str]] = None,
                    **kwargs) -> "FiniteMetricSpace":
        coords = np.asarray(coords, dtype=np.float64)
        if coords.ndim == 1:
            coords = coords[:, None]
        if ids is None:
            ids = [f"p{k}" for k in range(coords.shape[0])]
        return cls(ids, coords=coords, metric=metric, **kwargs)

    # ------------------------------------------------------------------
    # basic protocol
    # ------------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def size(self) -> int:
        return len(self.ids)

    @property
    def is_coordinate(self) -> bool:
        return self.metric in COORDINATE_METRICS

    def __repr__(self) -> str:
        name = f" '{self.label}'" if self.label else ""
        return f"<{type(self).__name__}{name} n={len(self)} metric={self.metric}>"

    def index_of(self, point_id: str) -> int:
        try:
            return self._index[str(point_id)]
        except KeyError:
            raise MalformedInputError(f"Unknown point id '{point_id}'", field="members") from None

    def full(self) -> "PointSet":
        return PointSet(self, np.arange(len(self)))

    def subset(self, members: Iterable[int]) -> "PointSet":
        return PointSet(self, members)

    def subset_by_ids(self, ids: Iterable[str]) -> "PointSet":
        return PointSet(self, [self.index_of(i) for i in ids])

    def singleton(self, index: int) -> "PointSet":
        return PointSet(self, [index])

    # ------------------------------------------------------------------
    # distances
    # ------------------------------------------------------------------

    def distance(self, i: int, j: int) -> float:
        return float(self.block(np.array([i]), np.array([j]))[0, 0])

    def block(self, rows, cols) -> np.ndarray:
        """Dense distance block d(rows[a], cols[b])."""
        rows = np.asarray(rows, dtype=np.intp)
        cols = np.asarray(cols, dtype=np.intp)
        if self.metric == "matrix":
            return self.matrix[np.ix_(rows, cols)]
        if self.metric == "discrete":
            return (rows[:, None] != cols[None, :]).astype(np.float64)
        if self.metric == "minkowski":
            return cdist(self.coords[rows], self.coords[cols], metric="minkowski", p=self.p)
        metric = {"euclidean": "euclidean", "manhattan": "cityblock", "chebyshev": "chebyshev"}[self.metric]
        return cdist(self.coords[rows], self.coords[cols], metric=metric)

    def distance_matrix(self) -> np.ndarray:
        if self.metric == "matrix":
            return self.matrix
        everything = np.arange(len(self))
        return self.block(everything, everything)

    def _kd_p(self) -> float:
        return {"euclidean": 2.0, "manhattan": 1.0, "chebyshev": np.inf}.get(self.metric, self.p)

    def _chunk_min(self, chunk: np.ndarray, targets: np.ndarray) -> np.ndarray:
        return self.block(chunk, targets).min(axis=1)

    def nearest_distances(self, sources, targets,
                          processor: Optional[ParallelProcessor] = None) -> np.ndarray:
        """For each source index, the distance to the nearest target (inf if no targets)."""
        sources = np.asarray(sources, dtype=np.intp)
        targets = np.asarray(targets, dtype=np.intp)
        if targets.size == 0:
            return np.full(sources.size, np.inf)
        if sources.size == 0:
            return np.empty(0)
        if sources.size * targets.size <= SMALL_BLOCK:
            return self.block(sources, targets).min(axis=1)
        if self.is_coordinate and sources.size * targets.size > KD_TREE_THRESHOLD:
            tree = cKDTree(self.coords[targets])
            distances, _ = tree.query(self.coords[sources], k=1, p=self._kd_p())
            return np.asarray(distances, dtype=np.float64)
        processor = processor or ParallelProcessor(self.config)
        rows = processor.block_rows(targets.size)
        chunks = [sources[i:i + rows] for i in range(0, sources.size, rows)]
        parts = processor.map_chunks(functools.partial(self._chunk_min, targets=targets), chunks)
        return np.concatenate(parts)

    def isolation_distances(self) -> np.ndarray:
        """d(x, X minus {x}) for every point x."""
        if len(self) < 2:
            raise DomainError("Isolation needs a space with at least two points")
        if self.is_coordinate and len(self) ** 2 > KD_TREE_THRESHOLD:
            tree = cKDTree(self.coords)
            distances, _ = tree.query(self.coords, k=2, p=self._kd_p())
            return np.asarray(distances[:, 1], dtype=np.float64)
        D = self.distance_matrix().copy()
        np.fill_diagonal(D, np.inf)
        return D.min(axis=1)

    def to_dict(self) -> dict:
        if self.metric == "matrix":
            metric = {"matrix": self.matrix.tolist()}
        elif self.metric == "minkowski":
            metric = {"minkowski": self.p}
        else:
            metric = self.metric
        points = []
        for k, point_id in enumerate(self.ids):
            record = {"id": point_id}
            if self.coords is not None:
                record["coords"] = self.coords[k].tolist()
            points.append(record)
        return {"metric": metric, "points": points}


class PointSet:
    """A nonempty subset of an ambient finite space, held as sorted member indices."""

    is_empty = False

    def __init__(self, space: FiniteMetricSpace, members):
        self.space = space
        arr = np.unique(np.asarray(list(members) if not isinstance(members, np.ndarray) else members,
                                   dtype=np.intp))
        if arr.size == 0:
            raise DomainError("A PointSet must be nonempty")
        if arr[0] < 0 or arr[-1] >= len(space):
            raise DomainError(f"Member index out of range for a space of {len(space)} points")
        arr.flags.writeable = False
        self.members = arr

    @cached_property
    def mask(self) -> np.ndarray:
        mask = np.zeros(len(self.space), dtype=bool)
        mask[self.members] = True
        mask.flags.writeable = False
        return mask

    @property
    def ids(self) -> List[str]:
        return [self.space.ids[k] for k in self.members]

    def __len__(self) -> int:
        return int(self.members.size)

    def __iter__(self):
        return (int(k) for k in self.members)

    def __contains__(self, index) -> bool:
        return 0 <= index < len(self.space) and bool(self.mask[index])

    def __eq__(self, other) -> bool:
        if not isinstance(other, (PointSet, EmptySet)):
            return NotImplemented
        return self.space is other.space and np.array_equal(self.members, other.members)

    def __hash__(self) -> int:
        return hash((id(self.space), self.members.tobytes()))

    def __repr__(self) -> str:
        from src.utils.helpers import format_set
        return f"PointSet{format_set(self.ids)}"

    def issubset(self, other: "PointSet") -> bool:
        require_same_space(self, other)
        return bool(np.all(other.mask[self.members]))

    def union(self, other: "PointSet") -> "PointSet":
        require_same_space(self, other)
        return PointSet(self.space, np.union1d(self.members, other.members))

    def intersection(self, other) -> Union["PointSet", "EmptySet"]:
        require_same_space(self, other)
        common = np.intersect1d(self.members, other.members)
        return PointSet(self.space, common) if common.size else EmptySet(self.space)

    def difference(self, other) -> Union["PointSet", "EmptySet"]:
        require_same_space(self, other)
        rest = np.setdiff1d(self.members, other.members)
        return PointSet(self.space, rest) if rest.size else EmptySet(self.space)

    def to_dict(self) -> dict:
        return {"members": self.ids}


class EmptySet:
    """The flagged empty subset, produced only by complementing the full space."""

    is_empty = True

    def __init__(self, space: FiniteMetricSpace):
        self.space = space
        self.members = np.empty(0, dtype=np.intp)
        self.members.flags.writeable = False

    @property
    def mask(self) -> np.ndarray:
        return np.zeros(len(self.space), dtype=bool)

    @property
    def ids(self) -> List[str]:
        return []

    def __len__(self) -> int:
        return 0

    def __iter__(self):
        return iter(())

    def __contains__(self, index) -> bool:
        return False

    def __eq__(self, other) -> bool:
        if not isinstance(other, (PointSet, EmptySet)):
            return NotImplemented
        return self.space is other.space and other.is_empty

    def __hash__(self) -> int:
        return hash((id(self.space), b""))

    def __repr__(self) -> str:
        return "EmptySet{}"

    def issubset(self, other) -> bool:
        require_same_space(self, other)
        return True

    def to_dict(self) -> dict:
        return {"members": [], "empty": True}


def require_same_space(*sets) -> FiniteMetricSpace:
    """Raise AmbientMismatchError unless all operands share one ambient space."""
    space = sets[0].space
    for other in sets[1:]:
        if other.space is not space:
            raise AmbientMismatchError(
                f"Operands live in different ambient spaces ({space!r} vs {other.space!r})")
    return space


def require_in_space(x: int, space: FiniteMetricSpace):
    if not (isinstance(x, (int, np.integer)) and 0 <= x < len(space)):
        raise AmbientMismatchError(f"Point index {x} is not in {space!r}")


class PointMap:
    """A total map table between two finite spaces."""

    def __init__(self, domain: FiniteMetricSpace, codomain: FiniteMetricSpace, table,
                 config: Optional[Config] = None):
        self.config = config or domain.config
        self.domain = domain
        self.codomain = codomain
        table = np.asarray(table, dtype=np.intp)
        if table.shape != (len(domain),):
            raise MalformedInputError(f"Map table must assign all {len(domain)} domain points",
                                      field="table")
        if table.size and (table.min() < 0 or table.max() >= len(codomain)):
            raise MalformedInputError("Map table points outside the codomain", field="table")
        if len(domain) > self.config.MAX_MAP_POINTS:
            raise CapacityError(f"Map domain has {len(domain)} points, cap is {self.config.MAX_MAP_POINTS}")
        table.flags.writeable = False
        self.table = table

    @classmethod
    def from_ids(cls, domain: FiniteMetricSpace, codomain: FiniteMetricSpace,
                 mapping: Dict[str, str]) -> "PointMap":
        missing = [i for i in domain.ids if i not in mapping]
        if missing:
            raise MalformedInputError(f"Map is not total: no image for '{missing[0]}'",
                                      field=f"table.{missing[0]}")
        return cls(domain, codomain, [codomain.index_of(mapping[i]) for i in domain.ids])

    @classmethod
    def identity(cls, space: FiniteMetricSpace) -> "PointMap":
        return cls(space, space, np.arange(len(space)))

    @classmethod
    def constant(cls, domain: FiniteMetricSpace, codomain: FiniteMetricSpace, target: int = 0) -> "PointMap":
        return cls(domain, codomain, np.full(len(domain), target))

    def __call__(self, x: int) -> int:
        return int(self.table[x])

    def image(self, members) -> np.ndarray:
        return np.unique(self.table[np.asarray(members, dtype=np.intp)])

    @cached_property
    def injective(self) -> bool:
        return np.unique(self.table).size == self.table.size

    @cached_property
    def surjective(self) -> bool:
        return np.unique(self.table).size == len(self.codomain)

    @property
    def bijective(self) -> bool:
        return self.injective and self.surjective

    def inverse(self) -> "PointMap":
        """Table inversion; only defined for bijective maps."""
        if not self.bijective:
            raise DomainError("Only bijective maps have an inverse table")
        inverse_table = np.empty(len(self.codomain), dtype=np.intp)
        inverse_table[self.table] = np.arange(len(self.domain))
        return PointMap(self.codomain, self.domain, inverse_table, config=self.config)

    def to_dict(self) -> dict:
        return {"table": {self.domain.ids[k]: self.codomain.ids[int(v)] for k, v in enumerate(self.table)}}


class SetSpace(FiniteMetricSpace):
    """A finite space whose points are PointSets over ``base`` and whose metric is H.

    Usable anywhere a FiniteMetricSpace is; building a SetSpace over a SetSpace
    gives the second-level hyperspace.
    """

    def __init__(self, base: FiniteMetricSpace, elements: Sequence[PointSet], matrix,
                 config: Optional[Config] = None, label: Optional[str] = None):
        self.base = base
        self.elements = tuple(elements)
        labels = ["{" + ",".join(e.ids) + "}" for e in self.elements]
        super().__init__(labels, matrix=matrix, validate=False,
                         config=config or base.config, label=label)
        self._element_index = {e: k for k, e in enumerate(self.elements)}

    def element(self, index: int) -> PointSet:
        return self.elements[index]

    def index_of_set(self, A: PointSet) -> int:
        try:
            return self._element_index[A]
        except KeyError:
            raise AmbientMismatchError(f"{A!r} is not an element of this set space") from None

    def to_dict(self) -> dict:
        data = super().to_dict()
        data["elements"] = [e.ids for e in self.elements]
        return data
