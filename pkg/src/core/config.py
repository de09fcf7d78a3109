"""
Configuration settings for hauslab computations.
"""

import os


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    return int(value) if value not in (None, "") else default


def _env_float(name: str, default: float) -> float:
    value = os.getenv(name)
    return float(value) if value not in (None, "") else default


class Config:
    """Configuration class for hauslab settings."""

    def __init__(self, **overrides):
        # Capacity limits
        self.MAX_POINTS = _env_int("HAUSLAB_MAX_POINTS", 4096)  # matrix metrics, O(n^3) validation
        self.MAX_GRID_POINTS = _env_int("HAUSLAB_MAX_GRID_POINTS", 1_000_000)  # coordinate spaces
        self.MAX_MAP_POINTS = _env_int("HAUSLAB_MAX_MAP_POINTS", 2048)

        # Arithmetic
        self.TOLERANCE = _env_float("HAUSLAB_TOLERANCE", 1e-12)
        self.PITCH_TOLERANCE_FACTOR = 2.0  # rasterized galleries: 2 * pitch

        # Reproducibility
        self.DEFAULT_SEED = _env_int("HAUSLAB_SEED", 42)

        # Families for lifted checks
        self.EXHAUSTIVE_LIMIT = _env_int("HAUSLAB_EXHAUSTIVE_LIMIT", 6)
        self.RANDOM_FAMILY_SIZE = _env_int("HAUSLAB_RANDOM_FAMILY_SIZE", 48)

        # Sequences
        self.DEFAULT_EPS = 0.5
        self.DEFAULT_TOL = 1e-9
        self.SUMMABLE_SLOPE = -1.1  # tail log-log slope at or below this looks summable
        self.DIVERGENT_SLOPE = -1.0  # at or above this looks divergent

        # Parallel processing configuration
        self.MAX_PARALLEL_WORKERS = _env_int("HAUSLAB_WORKERS", 1)
        self.PARALLEL_MODE = os.getenv("HAUSLAB_PARALLEL_MODE", "thread")  # 'thread' or 'process'
        self.BLOCK_MEMORY_MB = _env_int("HAUSLAB_BLOCK_MEMORY_MB", 256)

        for key, value in overrides.items():
            if not hasattr(self, key):
                raise AttributeError(f"Unknown configuration key: {key}")
            setattr(self, key, value)


DEFAULT_CONFIG = Config()
