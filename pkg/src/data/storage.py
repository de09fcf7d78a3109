"""
JSON readers and writers for space, subset, map and run-config files.

Readers report the offending field path (``points[3].coords[1]``) on malformed
input. Writers go through a temp file and a rename so a failed run leaves no
partial report behind.
"""

import csv
import io
import json
import logging
import math
import os
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from src.core.config import Config, DEFAULT_CONFIG
from src.core.errors import AmbientMismatchError, MalformedInputError
from src.data.models import NAMED_METRICS, FiniteMetricSpace, PointMap, PointSet
from src.utils.helpers import INF_TOKEN, dumps, parse_real, safe_directory_write, safe_file_write

logger = logging.getLogger(__name__)

Source = Union[str, Path, Dict[str, Any]]


def _reject_constant(token: str):
    raise ValueError(f"non-finite number {token}")


def read_json(path: Union[str, Path]) -> Any:
    """Parse a JSON file; NaN and Infinity literals are rejected."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise MalformedInputError(f"Cannot read {path}: {e.strerror}", field=str(path)) from e
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise MalformedInputError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}",
                                  field=f"{path}:{e.lineno}:{e.colno}") from e
    except ValueError as e:
        raise MalformedInputError(f"{path}: {e}", field=str(path)) from e


def _real(value: Any, field: str, nonnegative: bool = False) -> float:
    try:
        number = parse_real(value)
    except (TypeError, ValueError, ZeroDivisionError):
        raise MalformedInputError(f"Expected a real number at {field}, got {value!r}", field=field) from None
    if not math.isfinite(number):
        raise MalformedInputError(f"Non-finite number at {field}", field=field)
    if nonnegative and number < 0:
        raise MalformedInputError(f"Negative distance at {field}", field=field)
    return number


def _check_rational_matrix(ids: Sequence[str], rows: Sequence[Sequence[Any]]):
    """Symmetry and triangle inequality in exact arithmetic, for matrices with "p/q" entries."""
    D = np.array([[Fraction(v.strip()) if isinstance(v, str) else Fraction(v) for v in row] for row in rows],
                 dtype=object)
    asym = D != D.T
    if np.any(asym):
        i, j = np.argwhere(asym)[0]
        raise MalformedInputError("Distance matrix is not symmetric", field=f"metric.matrix[{i}][{j}]",
                                  witness={"axiom": "symmetry", "points": [ids[i], ids[j]]})
    for k in range(len(ids)):
        bad = D > D[:, [k]] + D[[k], :]
        if np.any(bad):
            i, j = np.argwhere(bad)[0]
            raise MalformedInputError(
                "Distance matrix violates the triangle inequality",
                field=f"metric.matrix[{i}][{j}]",
                witness={"axiom": "triangle", "points": [ids[i], ids[k], ids[j]],
                         "d_ij": str(D[i, j]), "d_ik": str(D[i, k]), "d_kj": str(D[k, j])})


def _expect(data: Any, kind: type, field: str):
    if not isinstance(data, kind):
        raise MalformedInputError(f"Expected {kind.__name__} at {field}, got {type(data).__name__}", field=field)
    return data


class FileStore:
    """Load and save hauslab JSON documents.

    Spaces are cached by content, so subsets and maps that reference the same
    space file (or an identical inline space) share one ambient object.
    """

    def __init__(self, config: Optional[Config] = None):
        self.config = config or DEFAULT_CONFIG
        self._spaces: Dict[str, FiniteMetricSpace] = {}

    # ------------------------------------------------------------------
    # spaces
    # ------------------------------------------------------------------

    def _resolve(self, source: Source, base_dir: Optional[Path]):
        """Return (document, label) for a path or an inline document."""
        if isinstance(source, dict):
            return source, None
        path = Path(source)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        return read_json(path), path

    def load_space(self, source: Source, validate: bool = True,
                   base_dir: Optional[Path] = None) -> FiniteMetricSpace:
        doc, path = self._resolve(source, base_dir)
        key = json.dumps(doc, sort_keys=True) + f"|{validate}"
        if key in self._spaces:
            return self._spaces[key]
        space = self.parse_space(doc, validate=validate, label=path.stem if path else None)
        self._spaces[key] = space
        logger.debug(f"Loaded {space!r} from {path or 'inline document'}")
        return space

    def parse_space(self, doc: Any, validate: bool = True, label: Optional[str] = None) -> FiniteMetricSpace:
        """Build a FiniteMetricSpace from a space document."""
        _expect(doc, dict, "$")
        if "metric" not in doc:
            raise MalformedInputError("Space document has no 'metric'", field="metric")
        points = _expect(doc.get("points"), list, "points")
        ids = []
        for k, point in enumerate(points):
            _expect(point, dict, f"points[{k}]")
            if "id" not in point:
                raise MalformedInputError(f"Point {k} has no id", field=f"points[{k}].id")
            ids.append(str(point["id"]))

        metric = doc["metric"]
        if isinstance(metric, dict) and "matrix" in metric:
            rows = _expect(metric["matrix"], list, "metric.matrix")
            if len(rows) != len(ids):
                raise MalformedInputError(f"Distance matrix has {len(rows)} rows for {len(ids)} points",
                                          field="metric.matrix")
            matrix = []
            for i, row in enumerate(rows):
                _expect(row, list, f"metric.matrix[{i}]")
                if len(row) != len(ids):
                    raise MalformedInputError(f"Row {i} has {len(row)} entries, expected {len(ids)}",
                                              field=f"metric.matrix[{i}]")
                matrix.append([_real(v, f"metric.matrix[{i}][{j}]", nonnegative=True) for j, v in enumerate(row)])
            space = FiniteMetricSpace.from_matrix(ids, matrix, validate=validate, config=self.config, label=label)
            if validate and any(isinstance(v, str) for row in rows for v in row):
                _check_rational_matrix(ids, rows)
            return space

        p = None
        if isinstance(metric, dict) and "minkowski" in metric:
            p = metric["minkowski"]
            p = math.inf if p == INF_TOKEN else _real(p, "metric.minkowski")
            metric = "minkowski"
        if not isinstance(metric, str) or metric not in NAMED_METRICS:
            raise MalformedInputError(f"Unknown metric {metric!r}", field="metric")

        coords = None
        if metric != "discrete":
            coords = []
            for k, point in enumerate(points):
                values = _expect(point.get("coords"), list, f"points[{k}].coords")
                coords.append([_real(v, f"points[{k}].coords[{c}]") for c, v in enumerate(values)])
            if len({len(c) for c in coords}) > 1:
                raise MalformedInputError("Points have different coordinate dimensions", field="points")
        return FiniteMetricSpace(ids, coords=coords, metric=metric, p=p, validate=validate,
                                 config=self.config, label=label)

    # ------------------------------------------------------------------
    # subsets and maps
    # ------------------------------------------------------------------

    def _space_of(self, doc: Dict[str, Any], field: str, space: Optional[FiniteMetricSpace],
                  base_dir: Optional[Path]) -> FiniteMetricSpace:
        if field not in doc:
            if space is None:
                raise MalformedInputError(f"No '{field}' given and no ambient space supplied", field=field)
            return space
        own = self.load_space(doc[field], base_dir=base_dir)
        if space is not None and own is not space:
            if own.to_dict() != space.to_dict():
                raise AmbientMismatchError(f"Document's '{field}' differs from the supplied ambient space")
            return space
        return own

    def load_subset(self, source: Source, space: Optional[FiniteMetricSpace] = None) -> PointSet:
        """Read {"space": path-or-inline, "members": [ids]}; ``space`` overrides a missing space field."""
        doc, path = self._resolve(source, None)
        _expect(doc, dict, "$")
        base_dir = path.parent if path else None
        ambient = self._space_of(doc, "space", space, base_dir)
        members = _expect(doc.get("members"), list, "members")
        if not members:
            raise MalformedInputError("Subset must be nonempty", field="members")
        indices = []
        for k, member in enumerate(members):
            try:
                indices.append(ambient.index_of(str(member)))
            except MalformedInputError:
                raise MalformedInputError(f"Unknown point id '{member}'", field=f"members[{k}]") from None
        return ambient.subset(indices)

    def load_map(self, source: Source, domain: Optional[FiniteMetricSpace] = None,
                 codomain: Optional[FiniteMetricSpace] = None) -> PointMap:
        """Read {"domain": ..., "codomain": ..., "table": {id: id}}; codomain defaults to domain."""
        doc, path = self._resolve(source, None)
        _expect(doc, dict, "$")
        base_dir = path.parent if path else None
        dom = self._space_of(doc, "domain", domain, base_dir)
        if "codomain" in doc or codomain is not None:
            cod = self._space_of(doc, "codomain", codomain, base_dir)
        else:
            cod = dom
        table = _expect(doc.get("table"), dict, "table")
        for key, value in table.items():
            if str(key) not in dom.ids:
                raise MalformedInputError(f"Map table names unknown domain point '{key}'", field=f"table.{key}")
            if str(value) not in cod.ids:
                raise MalformedInputError(f"Map table sends '{key}' to unknown point '{value}'",
                                          field=f"table.{key}")
        return PointMap.from_ids(dom, cod, {str(k): str(v) for k, v in table.items()})

    def load_run_config(self, source: Source) -> Dict[str, Any]:
        """Read a sequence run config and check its field types."""
        doc, path = self._resolve(source, None)
        _expect(doc, dict, "$")
        config: Dict[str, Any] = {}
        gallery = doc.get("gallery")
        if isinstance(gallery, str):
            config["gallery"] = gallery
        elif isinstance(gallery, dict) and "files" in gallery:
            files = _expect(gallery["files"], list, "gallery.files")
            base_dir = path.parent if path else Path.cwd()
            config["files"] = [str(base_dir / f) if not Path(f).is_absolute() else f for f in files]
        else:
            raise MalformedInputError("'gallery' must be a name or {\"files\": [...]}", field="gallery")
        if "N" in doc:
            if not isinstance(doc["N"], int) or isinstance(doc["N"], bool):
                raise MalformedInputError("'N' must be an integer", field="N")
            config["N"] = doc["N"]
        for key in ("eps", "tol", "pitch"):
            if key in doc:
                config[key] = _real(doc[key], key)
        if "params" in doc:
            config["params"] = dict(_expect(doc["params"], dict, "params"))
        return config

    def load_family_sets(self, files: Sequence[Source],
                         space: Optional[FiniteMetricSpace] = None) -> List[PointSet]:
        """Read K_1..K_N subset files; all must share one ambient space."""
        sets = []
        for source in files:
            K = self.load_subset(source, space)
            space = space or K.space
            if K.space is not space:
                raise AmbientMismatchError(f"Family file {source} lives in a different space")
            sets.append(K)
        return sets

    # ------------------------------------------------------------------
    # writers
    # ------------------------------------------------------------------

    def write_json(self, path: Union[str, Path], obj: Any) -> Path:
        path = Path(path)
        safe_file_write(path, dumps(obj))
        logger.info(f"Wrote {path}")
        return path

    def write_csv(self, path: Union[str, Path], rows: Iterable[Dict[str, Any]],
                  columns: Sequence[str]) -> Path:
        path = Path(path)
        safe_file_write(path, rows_to_csv(rows, columns))
        logger.info(f"Wrote {path}")
        return path

    def write_bundle(self, directory: Union[str, Path], files: Dict[str, str]) -> Path:
        """Write named text files into one directory, all or none."""
        directory = Path(directory)
        safe_directory_write(directory, files)
        logger.info(f"Wrote {', '.join(files)} to {directory}")
        return directory

    def emit_space(self, path: Union[str, Path], space: FiniteMetricSpace) -> Path:
        return self.write_json(path, space.to_dict())

    def emit_sets(self, directory: Union[str, Path], sets: Dict[str, PointSet],
                  space_path: Optional[Union[str, Path]] = None) -> List[Path]:
        """One subset file per named set, pointing at ``space_path`` or inlining the space."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for name, K in sets.items():
            if space_path is not None:
                space_ref: Any = os.path.relpath(Path(space_path).resolve(), directory.resolve())
            else:
                space_ref = K.space.to_dict()
            written.append(self.write_json(directory / f"{name}.json", {"space": space_ref, "members": K.ids}))
        return written


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return INF_TOKEN if value > 0 else "-inf"
        return repr(value)
    return str(value)


def rows_to_csv(rows: Iterable[Dict[str, Any]], columns: Sequence[str]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(row.get(c)) for c in columns])
    return buffer.getvalue()
