"""
Worked-example generators.

Each generator returns a NestedFamily over a rasterized or exact finite ambient
space together with the closed-form gap H_n where one is known, so measured
gaps can be checked against calculus. Continuum examples are sampled on a grid;
their gap tolerance is two grid cells.
"""

import functools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse.csgraph import shortest_path

from src.core.config import Config, DEFAULT_CONFIG
from src.core.errors import DomainError
from src.data.models import FiniteMetricSpace, PointSet
from src.processors.metric_core import hausdorff
from src.processors.parallel_processor import ParallelProcessor
from src.processors.sequences import NestedFamily
from src.utils.helpers import log_processing_stats, parse_real

logger = logging.getLogger(__name__)

# Membership slack for rasterized regions; grid coordinates are rounded to 12 places.
MEMBERSHIP_SLACK = 1e-12
GRID_DECIMALS = 12


def _require(condition: bool, message: str):
    if not condition:
        raise DomainError(message)


def _symmetric_grid(half_width: float, pitch: float) -> np.ndarray:
    """Grid k*pitch on [-half_width, half_width], containing 0 and both ends."""
    steps = half_width / pitch
    m = int(round(steps))
    _require(abs(steps - m) < 1e-9, f"pitch {pitch} must divide {half_width}")
    return np.round(np.arange(-m, m + 1) * pitch, GRID_DECIMALS)


# ----------------------------------------------------------------------
# power functions in C[0,1]
# ----------------------------------------------------------------------

def power_gap(n: int) -> float:
    """max over t in [0,1] of t^n - t^(n+1), attained at t = n/(n+1)."""
    return n ** n / (n + 1) ** (n + 1)


def power_gap_on_grid(n: int, pitch: float) -> float:
    """The same maximum taken over the sampling grid only."""
    t = np.linspace(0.0, 1.0, int(round(1.0 / pitch)) + 1)
    return float(np.max(t ** n - t ** (n + 1)))


def power_functions(pitch: float = 1e-3, i_max: int = 200, n_max: int = 16,
                    config: Optional[Config] = None) -> NestedFamily:
    """x_i(t) = t^i sampled on a grid of [0,1] under the sup distance; K_n = {x_i : n <= i <= i_max}."""
    _require(0 < pitch <= 1e-2, f"power_functions needs 0 < pitch <= 1e-2, got {pitch}")
    _require(n_max >= 2, f"power_functions needs n_max >= 2, got {n_max}")
    _require(i_max >= n_max + 10, f"power_functions needs i_max >= n_max + 10, got i_max={i_max}, n_max={n_max}")

    t = np.linspace(0.0, 1.0, int(round(1.0 / pitch)) + 1)
    exponents = np.arange(1, i_max + 1)
    samples = t[None, :] ** exponents[:, None]
    space = FiniteMetricSpace.from_coords(samples, metric="chebyshev",
                                          ids=[f"t^{i}" for i in exponents],
                                          config=config, label="power_functions")
    return NestedFamily(
        space,
        lambda n: PointSet(space, np.arange(n - 1, i_max)),
        "power_functions",
        params={"pitch": pitch, "i_max": i_max, "n_max": n_max},
        max_horizon=n_max,
        analytic_gap=power_gap,
    )


# ----------------------------------------------------------------------
# regions between two parabolas
# ----------------------------------------------------------------------

PARABOLIC_HALF_WIDTH = 2.5


def parabolic_member(n: int, x, y, slack: float = MEMBERSHIP_SLACK):
    """-1/n + x^2/(4n) <= y <= 1/n - x^2/(4n), elementwise."""
    bound = 1.0 / n - np.asarray(x) ** 2 / (4.0 * n)
    return np.abs(y) <= bound + slack


def parabolic_gap(n: int) -> float:
    return 1.0 / n - 1.0 / (n + 1)


def parabolic_regions(pitch: float = 1e-2, n_max: int = 8,
                      config: Optional[Config] = None) -> NestedFamily:
    """K_n = grid points of [-2.5, 2.5]^2 between the parabolas 4n(y -+ 1/n) = -+x^2.

    The intended limit is the raster of the segment [-2,2] x {0}.
    """
    _require(0 < pitch <= 1e-2, f"parabolic_regions needs 0 < pitch <= 1e-2, got {pitch}")
    _require(n_max >= 2, f"parabolic_regions needs n_max >= 2, got {n_max}")

    axis = _symmetric_grid(PARABOLIC_HALF_WIDTH, pitch)
    xs, ys = np.meshgrid(axis, axis, indexing="ij")
    x, y = xs.ravel(), ys.ravel()
    m = axis.size
    ids = [f"r{i}c{j}" for i in range(m) for j in range(m)]
    space = FiniteMetricSpace.from_coords(np.column_stack([x, y]), metric="euclidean", ids=ids,
                                          config=config, validate=False, label="parabolic_regions")
    segment = PointSet(space, np.flatnonzero((y == 0.0) & (np.abs(x) <= 2.0 + MEMBERSHIP_SLACK)))
    logger.debug(f"Parabolic raster: {len(space)} grid points, limit raster of {len(segment)} points")

    return NestedFamily(
        space,
        lambda n: PointSet(space, np.flatnonzero(parabolic_member(n, x, y))),
        "parabolic_regions",
        params={"pitch": pitch, "n_max": n_max},
        limit=segment,
        max_horizon=n_max,
        analytic_gap=parabolic_gap,
        region=lambda n, point: bool(parabolic_member(n, point[0], point[1])),
    )


# ----------------------------------------------------------------------
# standard basis of l^p
# ----------------------------------------------------------------------

def lp_constant(p: float) -> float:
    """||e_i - e_j||_p for i != j."""
    return 1.0 if math.isinf(p) else 2.0 ** (1.0 / p)


def lp_basis(p: float = 2.0, dim: Optional[int] = None, n_max: int = 16,
             config: Optional[Config] = None) -> NestedFamily:
    """Basis vectors e_1..e_dim of R^dim under the p-norm; K_n = {e_i : i >= n}."""
    p = float(p)
    _require(p >= 1, f"lp_basis needs p in [1, inf], got {p}")
    dim = n_max + 1 if dim is None else dim
    _require(n_max >= 2, f"lp_basis needs n_max >= 2, got {n_max}")
    _require(dim >= n_max + 1, f"lp_basis needs dim >= n_max + 1, got dim={dim}, n_max={n_max}")

    space = FiniteMetricSpace.from_coords(np.eye(dim), metric="minkowski", p=p,
                                          ids=[f"e{i}" for i in range(1, dim + 1)],
                                          config=config, label="lp_basis")
    constant = lp_constant(p)
    return NestedFamily(
        space,
        lambda n: PointSet(space, np.arange(n - 1, dim)),
        "lp_basis",
        params={"p": p, "dim": dim, "n_max": n_max},
        max_horizon=n_max,
        analytic_gap=lambda n: constant,
    )


# ----------------------------------------------------------------------
# shrinking intervals
# ----------------------------------------------------------------------

def interval_gap(n: int) -> float:
    return 1.0 / n - 1.0 / (n + 1)


def shrinking_intervals(pitch: float = 1e-3, n_max: int = 16,
                        config: Optional[Config] = None) -> NestedFamily:
    """K_n = grid of [-1,1] intersected with [-1/n, 1/n]; intended limit {0}."""
    _require(0 < pitch <= 0.1, f"shrinking_intervals needs 0 < pitch <= 0.1, got {pitch}")
    _require(n_max >= 2, f"shrinking_intervals needs n_max >= 2, got {n_max}")

    grid = _symmetric_grid(1.0, pitch)
    space = FiniteMetricSpace.from_coords(grid, metric="euclidean",
                                          ids=[f"{v:.12g}" for v in grid],
                                          config=config, label="shrinking_intervals")
    zero = PointSet(space, np.flatnonzero(grid == 0.0))
    return NestedFamily(
        space,
        lambda n: PointSet(space, np.flatnonzero(np.abs(grid) <= 1.0 / n + MEMBERSHIP_SLACK)),
        "shrinking_intervals",
        params={"pitch": pitch, "n_max": n_max},
        limit=zero,
        max_horizon=n_max,
        analytic_gap=interval_gap,
    )


# ----------------------------------------------------------------------
# clusters at the integers
# ----------------------------------------------------------------------

def atsuji_union(n_max: int = 3, m_max: int = 50, config: Optional[Config] = None) -> FiniteMetricSpace:
    """The real set of all n and n + 1/(2m) for n <= n_max, m <= m_max, with |s - t|.

    Point (n, m) sits at index (n-1)*(m_max+1) + m, where m = 0 stands for n itself.
    """
    _require(n_max >= 2 and m_max >= 2, f"atsuji_union needs n_max, m_max >= 2, got {n_max}, {m_max}")
    values, ids = [], []
    for n in range(1, n_max + 1):
        values.append(float(n))
        ids.append(str(n))
        for m in range(1, m_max + 1):
            values.append(n + 1.0 / (2 * m))
            ids.append(f"{n}+1/{2 * m}")
    return FiniteMetricSpace.from_coords(np.array(values), metric="euclidean", ids=ids,
                                         config=config, label="atsuji_union")


def atsuji_index(n: int, m: int, m_max: int) -> int:
    return (n - 1) * (m_max + 1) + m


def atsuji_cluster_family(n_max: int = 3, m_max: int = 50, q: int = 1,
                          config: Optional[Config] = None) -> NestedFamily:
    """K_i = {q} and the cluster points q + 1/(2m) with i <= m <= m_max, for i <= m_max + 1."""
    _require(1 <= q <= n_max, f"atsuji_cluster_family needs 1 <= q <= n_max, got q={q}")
    space = atsuji_union(n_max, m_max, config=config)
    base = atsuji_index(q, 0, m_max)

    def generator(i: int) -> PointSet:
        return PointSet(space, [base] + [base + m for m in range(i, m_max + 1)])

    def gap(i: int) -> float:
        return 1.0 / (2 * i) - 1.0 / (2 * i + 2) if i < m_max else 1.0 / (2 * m_max)

    return NestedFamily(
        space, generator, "atsuji_union",
        params={"n_max": n_max, "m_max": m_max, "q": q},
        limit=PointSet(space, [base]),
        max_horizon=m_max + 1,
        analytic_gap=gap,
    )


# ----------------------------------------------------------------------
# random fixtures
# ----------------------------------------------------------------------

def random_space(size: int, seed: int, kind: str = "matrix", max_weight: int = 9,
                 config: Optional[Config] = None) -> FiniteMetricSpace:
    """A seeded random space.

    ``matrix``: shortest-path metric of a complete graph with integer edge
    weights 1..max_weight, so every entry is an exact small integer.
    ``euclidean``: uniform points in the unit square.
    """
    _require(size >= 1, f"random_space needs size >= 1, got {size}")
    rng = np.random.default_rng(seed)
    ids = [f"x{k}" for k in range(size)]
    if kind == "matrix":
        weights = np.triu(rng.integers(1, max_weight + 1, size=(size, size)), 1).astype(np.float64)
        D = shortest_path(weights + weights.T, method="FW", directed=False)
        return FiniteMetricSpace.from_matrix(ids, D, config=config, label=f"random-matrix-{seed}")
    if kind == "euclidean":
        return FiniteMetricSpace.from_coords(rng.random((size, 2)), metric="euclidean", ids=ids,
                                             config=config, label=f"random-euclidean-{seed}")
    raise DomainError(f"Unknown random space kind '{kind}'")


def random_nested_family(space_size: int = 12, N: int = 8, seed: int = 42,
                         config: Optional[Config] = None) -> NestedFamily:
    """K_1 = X; each later set deletes one more point, in a seeded random order."""
    _require(2 <= N <= space_size, f"random_nested_family needs 2 <= N <= space_size, got N={N}")
    space = random_space(space_size, seed, config=config)
    order = np.random.default_rng(seed).permutation(space_size)

    def generator(n: int) -> PointSet:
        return PointSet(space, np.sort(order[n - 1:]))

    return NestedFamily(space, generator, "random_nested",
                        params={"space_size": space_size, "N": N, "seed": seed},
                        limit=generator(N), max_horizon=N)


# ----------------------------------------------------------------------
# complement witnesses
# ----------------------------------------------------------------------

def complement_witness_arena(config: Optional[Config] = None) -> Tuple[FiniteMetricSpace, PointSet, PointSet]:
    """The line {0,1,2,3} with A = {0,1,2}, B = {1,2,3}: H(A,B) = 1 but H(X-A, X-B) = 3."""
    space = FiniteMetricSpace.from_coords([0.0, 1.0, 2.0, 3.0], ids=["0", "1", "2", "3"],
                                          config=config, label="complement_witness_arena")
    return space, PointSet(space, [0, 1, 2]), PointSet(space, [1, 2, 3])


def _relation(left: float, right: float, tol: float) -> str:
    if left > right + tol:
        return ">"
    if left < right - tol:
        return "<"
    return "="


def _witness_record(A: PointSet, B: PointSet, tol: float, **extra) -> dict:
    space = A.space
    CA = PointSet(space, np.flatnonzero(~A.mask))
    CB = PointSet(space, np.flatnonzero(~B.mask))
    h_sets, h_complements = hausdorff(A, B), hausdorff(CA, CB)
    return {
        "relation": _relation(h_complements, h_sets, tol),
        "H_AB": h_sets,
        "H_complements": h_complements,
        "A": A.ids, "B": B.ids,
        "X_minus_A": CA.ids, "X_minus_B": CB.ids,
        "space": space.to_dict(),
        **extra,
    }


def _overlapping_pair(space: FiniteMetricSpace, rng: np.random.Generator):
    """Random A, B with A and B meeting, neither inside the other, neither all of X."""
    n = len(space)
    while True:
        a, b = rng.random(n) < 0.5, rng.random(n) < 0.5
        if (a & b).any() and (a & ~b).any() and (b & ~a).any() and not a.all() and not b.all():
            return PointSet(space, np.flatnonzero(a)), PointSet(space, np.flatnonzero(b))


def _witness_batch(job, space_size: int, tol: float, config: Config) -> dict:
    """Run one seeded batch; keeps the first witness per direction and relation counts."""
    batch, seed_seq, n_trials = job
    rng = np.random.default_rng(seed_seq)
    found: Dict[str, dict] = {}
    counts = {">": 0, "<": 0, "=": 0}
    for trial in range(n_trials):
        kind = "matrix" if trial % 2 == 0 else "euclidean"
        space = random_space(space_size, int(rng.integers(2 ** 32)), kind=kind, config=config)
        A, B = _overlapping_pair(space, rng)
        record = _witness_record(A, B, tol, source="random", batch=batch, trial=trial)
        counts[record["relation"]] += 1
        if record["relation"] != "=" and record["relation"] not in found:
            found[record["relation"]] = record
    return {"batch": batch, "trials": n_trials, "found": found, "counts": counts}


@dataclass
class WitnessReport:
    """Witnesses of both strict orientations between H(A,B) and H(X-A, X-B)."""

    seed: int
    space_size: int
    trials_requested: int
    trials_examined: int
    greater: Optional[dict]
    less: Optional[dict]
    counts: Dict[str, int] = field(default_factory=dict)
    not_found: List[str] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.not_found


def complement_witness_search(space_size: int = 8, trials: int = 10_000, seed: int = 42,
                              batch_size: int = 250, tol: float = 1e-12,
                              processor: Optional[ParallelProcessor] = None,
                              config: Optional[Config] = None) -> WitnessReport:
    """Search overlapping, non-nested pairs for both H(X-A,X-B) > H(A,B) and < H(A,B).

    The 4-point line arena is checked first. Random trials run in batches seeded
    from SeedSequence(seed).spawn; batches are consumed in order and the search
    stops after the first batch by which both directions are known, so the
    report does not depend on the number of workers.
    """
    _require(4 <= space_size <= 64, f"complement_witness_search needs 4 <= space_size <= 64, got {space_size}")
    _require(trials >= 0, f"trials must be >= 0, got {trials}")
    config = config or DEFAULT_CONFIG
    processor = processor or ParallelProcessor(config)
    start_time = time.time()

    _, A, B = complement_witness_arena(config)
    arena = _witness_record(A, B, tol, source="arena")
    found = {arena["relation"]: arena} if arena["relation"] != "=" else {}
    counts = {">": 0, "<": 0, "=": 0}

    n_batches = math.ceil(trials / batch_size) if trials else 0
    children = np.random.SeedSequence(seed).spawn(n_batches)
    jobs = [(k, children[k], min(batch_size, trials - k * batch_size)) for k in range(n_batches)]
    run = functools.partial(_witness_batch, space_size=space_size, tol=tol, config=config)

    examined = 0
    wave = max(1, processor.max_workers)
    for start in range(0, n_batches, wave):
        if ">" in found and "<" in found:
            break
        for result in processor.map_chunks(run, jobs[start:start + wave]):
            if ">" in found and "<" in found:
                break
            examined += result["trials"]
            for relation, count in result["counts"].items():
                counts[relation] += count
            for relation, record in result["found"].items():
                found.setdefault(relation, record)

    not_found = [r for r in (">", "<") if r not in found]
    if not_found:
        logger.warning(f"Complement witness search found no '{', '.join(not_found)}' witness in {examined} trials")
    log_processing_stats("Complement witness search", examined, "trials", time.time() - start_time)
    return WitnessReport(seed, space_size, trials, examined, found.get(">"), found.get("<"), counts, not_found)


# ----------------------------------------------------------------------
# registry
# ----------------------------------------------------------------------

def _int(value) -> int:
    return int(value)


def _real(value) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity"):
            return math.inf
        return parse_real(value)
    return float(value)


GALLERY_PARAMS: Dict[str, Dict[str, Callable[[Any], Any]]] = {
    "power_functions": {"pitch": _real, "i_max": _int, "n_max": _int},
    "parabolic_regions": {"pitch": _real, "n_max": _int},
    "lp_basis": {"p": _real, "dim": _int, "n_max": _int},
    "shrinking_intervals": {"pitch": _real, "n_max": _int},
    "atsuji_union": {"n_max": _int, "m_max": _int, "q": _int},
    "random_nested": {"space_size": _int, "N": _int, "seed": _int},
    "complement_witness_arena": {},
}


@dataclass
class GallerySpec:
    name: str
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in GALLERY_PARAMS:
            raise DomainError(f"Unknown gallery '{self.name}' (known: {', '.join(sorted(GALLERY_PARAMS))})")
        schema = GALLERY_PARAMS[self.name]
        parsed = {}
        for key, value in self.params.items():
            if key not in schema:
                raise DomainError(f"Gallery '{self.name}' has no parameter '{key}'")
            try:
                parsed[key] = schema[key](value)
            except (TypeError, ValueError) as e:
                raise DomainError(f"Bad value for {self.name}.{key}: {value!r}") from e
        self.params = parsed

    @classmethod
    def from_pairs(cls, name: str, pairs: Sequence[str]) -> "GallerySpec":
        """Build from CLI-style 'key=value' strings."""
        params = {}
        for pair in pairs:
            key, sep, value = pair.partition("=")
            if not sep:
                raise DomainError(f"Gallery parameter must look like key=value, got '{pair}'")
            params[key.strip()] = value.strip()
        return cls(name, params)

    def with_horizon(self, N: int) -> "GallerySpec":
        """Raise the family cutoff to cover a requested horizon when it was not set."""
        params = dict(self.params)
        if self.name in ("power_functions", "parabolic_regions", "lp_basis", "shrinking_intervals"):
            params.setdefault("n_max", max(N, 2))
        elif self.name == "random_nested":
            params.setdefault("N", N)
            params.setdefault("space_size", max(N, 12))
        elif self.name == "atsuji_union":
            params.setdefault("m_max", max(N - 1, 50))
        return GallerySpec(self.name, params)


@dataclass
class Gallery:
    """A built gallery: its ambient space, its nested family and any named extra sets."""

    spec: GallerySpec
    space: FiniteMetricSpace
    family: Optional[NestedFamily]
    sets: Dict[str, PointSet] = field(default_factory=dict)


def build_gallery(spec: GallerySpec, config: Optional[Config] = None) -> Gallery:
    """Dispatch a GallerySpec to its generator."""
    params = dict(spec.params)
    if spec.name == "complement_witness_arena":
        space, A, B = complement_witness_arena(config)
        return Gallery(spec, space, None, {"A": A, "B": B})

    builders: Dict[str, Callable[..., NestedFamily]] = {
        "power_functions": power_functions,
        "parabolic_regions": parabolic_regions,
        "lp_basis": lp_basis,
        "shrinking_intervals": shrinking_intervals,
        "atsuji_union": atsuji_cluster_family,
        "random_nested": random_nested_family,
    }
    family = builders[spec.name](config=config, **params)
    logger.info(f"Built gallery '{spec.name}' over {len(family.space)} points with params {family.params}")
    return Gallery(spec, family.space, family)


def default_galleries() -> List[GallerySpec]:
    """Small instances of every family gallery, for suites that sweep them all."""
    return [
        GallerySpec("power_functions", {"pitch": 1e-2, "i_max": 40, "n_max": 12}),
        GallerySpec("parabolic_regions", {"pitch": 1e-2, "n_max": 6}),
        GallerySpec("lp_basis", {"p": 1.0, "n_max": 12}),
        GallerySpec("lp_basis", {"p": 2.0, "n_max": 12}),
        GallerySpec("lp_basis", {"p": math.inf, "n_max": 12}),
        GallerySpec("shrinking_intervals", {"pitch": 1e-2, "n_max": 16}),
        GallerySpec("atsuji_union", {"n_max": 3, "m_max": 20, "q": 2}),
    ]
