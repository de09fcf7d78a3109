"""
Utility functions shared by the hauslab processors and CLI.
"""

import dataclasses
import json
import logging
import math
import os
import shutil
import tempfile
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable

import numpy as np

logger = logging.getLogger(__name__)

INF_TOKEN = "inf"


def leq(a: float, b: float, tol: float = 1e-12) -> bool:
    """a <= b up to a relative tolerance; infinities compare exactly."""
    if math.isinf(a) or math.isinf(b):
        return a <= b
    return a <= b + tol * max(1.0, abs(a), abs(b))


def parse_real(value: Any) -> float:
    """Parse a JSON number or a "p/q" rational string into a float."""
    if isinstance(value, bool):
        raise ValueError("booleans are not distances")
    if isinstance(value, str):
        return float(Fraction(value.strip()))
    return float(value)


def to_jsonable(obj: Any) -> Any:
    """Convert reports into JSON-compatible structures; +infinity becomes "inf"."""
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isinf(value):
            return INF_TOKEN if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return value
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj: Any) -> str:
    """Canonical JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def safe_file_write(file_path: Path, content: str):
    """Write content atomically: temp file in the target directory, then rename."""
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=file_path.parent, prefix=f".{file_path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(content)
        os.replace(tmp_name, file_path)
        logger.debug(f"Wrote {len(content)} characters to {file_path}")
    except Exception as e:
        logger.error(f"Failed to write file {file_path}: {str(e)}")
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def safe_directory_write(directory: Path, files: Dict[str, str]):
    """Write several files as one unit: stage them in a sibling temp directory, then move them in."""
    directory = Path(directory)
    directory.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(dir=directory.parent, prefix=f".{directory.name}.", suffix=".tmp"))
    try:
        for name, content in files.items():
            with open(staging / name, "w", encoding="utf-8", newline="") as f:
                f.write(content)
        if directory.exists():
            for name in files:
                os.replace(staging / name, directory / name)
            staging.rmdir()
        else:
            os.replace(staging, directory)
        logger.debug(f"Wrote {len(files)} files to {directory}")
    except Exception as e:
        logger.error(f"Failed to write directory {directory}: {str(e)}")
        shutil.rmtree(staging, ignore_errors=True)
        raise


def log_processing_stats(task: str, items: int, unit: str, processing_time: float):
    """Log statistics about a finished computation."""
    logger.info(f"{task} completed: {items} {unit} in {processing_time:.2f}s")


def format_set(ids: Iterable[str], limit: int = 8) -> str:
    """Short human-readable rendering of a set of point ids."""
    ids = list(ids)
    if len(ids) <= limit:
        return "{" + ",".join(ids) + "}"
    head = ",".join(ids[:limit])
    return "{" + head + f",... (+{len(ids) - limit})" + "}"
