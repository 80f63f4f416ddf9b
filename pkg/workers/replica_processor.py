"""Replica processor with a bounded concurrent worker pool."""

import asyncio
import contextvars
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

from utils.errors import BatchFailure


logger = logging.getLogger(__name__)

T = TypeVar("T")

BatchTask = Callable[[Sequence[int]], List[T]]


def split_batches(replicas: int, batch_size: int) -> List[range]:
    """Contiguous index ranges covering 0..replicas-1."""
    if replicas < 0 or batch_size < 1:
        raise ValueError("need replicas >= 0 and batch_size >= 1")
    return [range(start, min(start + batch_size, replicas)) for start in range(0, replicas, batch_size)]


class ReplicaProcessor:
    """Runs replica batches concurrently on a thread pool."""

    def __init__(self, max_concurrent_workers: int = 4, batch_size: int = 250):
        """
        Initialize the replica processor.

        Args:
            max_concurrent_workers: Maximum number of batches in flight
            batch_size: Replicas per batch
        """
        if max_concurrent_workers < 1:
            raise ValueError("max_concurrent_workers must be at least 1")
        self.max_concurrent_workers = max_concurrent_workers
        self.batch_size = batch_size
        self.semaphore: Optional[asyncio.Semaphore] = None
        logger.info(
            f"ReplicaProcessor initialized with max_concurrent_workers={max_concurrent_workers}, "
            f"batch_size={batch_size}"
        )

    async def process_replicas(self, task: BatchTask, replicas: int) -> List[T]:
        """
        Run ``task`` over every replica index, batch by batch.

        Args:
            task: Maps a contiguous range of replica indices to one result each
            replicas: Number of replicas

        Returns:
            Results concatenated in replica-index order

        Raises:
            BatchFailure: If any batch raised; carries the first failure
        """
        batches = split_batches(replicas, self.batch_size)
        logger.info(
            f"Processing {replicas} replicas in {len(batches)} batches "
            f"with up to {self.max_concurrent_workers} concurrent workers"
        )
        self.semaphore = asyncio.Semaphore(self.max_concurrent_workers)
        started = time.time()

        with ThreadPoolExecutor(max_workers=self.max_concurrent_workers) as executor:
            tasks = [self._process_batch(executor, task, batch) for batch in batches]
            results = await asyncio.gather(*tasks, return_exceptions=True)

        final_results: List[T] = []
        for batch, result in zip(batches, results):
            if isinstance(result, Exception):
                logger.error(f"Batch [{batch.start}, {batch.stop}) failed with exception: {result}")
                raise BatchFailure(
                    f"replica batch [{batch.start}, {batch.stop}) failed: {result}",
                    {"first_replica": batch.start, "last_replica": batch.stop - 1,
                     "error": type(result).__name__},
                ) from result
            final_results.extend(result)

        logger.info(f"Completed {replicas} replicas in {time.time() - started:.2f}s")
        return final_results

    async def _process_batch(self, executor: ThreadPoolExecutor, task: BatchTask, batch: range) -> List[T]:
        """
        Run one batch in the executor.

        Uses the semaphore to limit batches in flight.
        """
        async with self.semaphore:
            logger.debug(f"Worker acquired for replicas [{batch.start}, {batch.stop})")
            start_time = time.time()
            loop = asyncio.get_running_loop()
            # the run id lives in a ContextVar, which executor threads do not inherit
            context = contextvars.copy_context()
            results = await loop.run_in_executor(executor, context.run, task, batch)
            if len(results) != len(batch):
                raise RuntimeError(f"batch returned {len(results)} results for {len(batch)} replicas")
            logger.debug(
                f"Replicas [{batch.start}, {batch.stop}) completed in "
                f"{int((time.time() - start_time) * 1000)}ms"
            )
            return results


def run_replicas(task: BatchTask, replicas: int, workers: int = 4, batch_size: int = 250) -> List[T]:
    """Synchronous wrapper around ``ReplicaProcessor.process_replicas``."""
    processor = ReplicaProcessor(max_concurrent_workers=workers, batch_size=batch_size)
    return asyncio.run(processor.process_replicas(task, replicas))
