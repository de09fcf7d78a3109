"""
Parallel chunk processing for sup loops, pair loops and seeded trial batches.

Results are always collected in submission order, so any reduction over them
is independent of the number of workers.
"""

import logging
import pickle
import time
from concurrent.futures import ThreadPoolExecutor, ProcessPoolExecutor
from typing import Any, Callable, List, Optional, Sequence

import psutil

from src.core.config import Config, DEFAULT_CONFIG

logger = logging.getLogger(__name__)


class ParallelProcessor:
    """Run independent chunk jobs serially or on a worker pool."""

    def __init__(self, config: Optional[Config] = None, workers: Optional[int] = None):
        self.config = config or DEFAULT_CONFIG
        requested = workers if workers is not None else getattr(self.config, "MAX_PARALLEL_WORKERS", 1)
        self.max_workers = max(1, min(
            requested,
            psutil.cpu_count(logical=True) or 1,
            8  # Cap at 8 to avoid overloading
        ))
        self.processing_mode = getattr(self.config, "PARALLEL_MODE", "thread")  # 'thread' or 'process'
        self.block_memory_mb = getattr(self.config, "BLOCK_MEMORY_MB", 256)

        logger.debug(f"Initialized parallel processor: {self.max_workers} workers, "
                     f"mode: {self.processing_mode}")

    @property
    def parallel(self) -> bool:
        return self.max_workers > 1

    def block_rows(self, n_cols: int, itemsize: int = 8) -> int:
        """Rows per distance block so one block stays within the memory budget."""
        budget = self.block_memory_mb * 1024 ** 2
        try:
            available = psutil.virtual_memory().available
            # leave room for the other workers' blocks
            budget = min(budget, available // (4 * self.max_workers))
        except Exception as e:
            logger.warning(f"Could not check memory availability: {str(e)}")
        return max(1, int(budget // max(1, n_cols * itemsize)))

    def map_chunks(self, func: Callable[[Any], Any], chunks: Sequence[Any]) -> List[Any]:
        """Apply func to every chunk; results come back in chunk order."""
        if not self.parallel or len(chunks) <= 1:
            return [func(chunk) for chunk in chunks]

        start_time = time.time()
        executor_class = ThreadPoolExecutor
        if self.processing_mode == "process":
            try:
                pickle.dumps(func)
                executor_class = ProcessPoolExecutor
            except Exception:
                logger.debug("Job is not picklable, using threads")
        try:
            with executor_class(max_workers=self.max_workers) as executor:
                futures = [executor.submit(func, chunk) for chunk in chunks]
                results = [future.result() for future in futures]
        except Exception as e:
            logger.error(f"Parallel processing failed: {str(e)}")
            raise

        logger.debug(f"Parallel processing of {len(chunks)} chunks completed in "
                     f"{time.time() - start_time:.2f}s")
        return results

    @staticmethod
    def split(items: Sequence[Any], n_chunks: int) -> List[Sequence[Any]]:
        """Split items into at most n_chunks contiguous chunks."""
        n_chunks = max(1, min(n_chunks, len(items)))
        size, extra = divmod(len(items), n_chunks)
        chunks = []
        start = 0
        for i in range(n_chunks):
            stop = start + size + (1 if i < extra else 0)
            chunks.append(items[start:stop])
            start = stop
        return chunks
