"""Tests for the concurrent replica processor."""

import threading
import time

import pytest

from utils.errors import BatchFailure
from workers.replica_processor import ReplicaProcessor, run_replicas, split_batches


def squares(batch):
    return [i * i for i in batch]


def test_split_batches():
    assert split_batches(10, 4) == [range(0, 4), range(4, 8), range(8, 10)]
    assert split_batches(0, 4) == []
    with pytest.raises(ValueError):
        split_batches(10, 0)


def test_rejects_zero_workers():
    with pytest.raises(ValueError):
        ReplicaProcessor(max_concurrent_workers=0)


@pytest.mark.asyncio
async def test_results_in_replica_order():
    processor = ReplicaProcessor(max_concurrent_workers=3, batch_size=7)

    def slow_first(batch):
        # earlier batches finish last
        time.sleep(0.01 * (5 - batch.start // 7))
        return squares(batch)

    results = await processor.process_replicas(slow_first, 30)
    assert results == [i * i for i in range(30)]


@pytest.mark.asyncio
async def test_concurrency_is_bounded():
    lock = threading.Lock()
    active = [0]
    peak = [0]

    def tracked(batch):
        with lock:
            active[0] += 1
            peak[0] = max(peak[0], active[0])
        time.sleep(0.02)
        with lock:
            active[0] -= 1
        return list(batch)

    processor = ReplicaProcessor(max_concurrent_workers=2, batch_size=1)
    await processor.process_replicas(tracked, 8)
    assert peak[0] <= 2


@pytest.mark.asyncio
async def test_batch_failure_carries_range():
    def failing(batch):
        if 10 in batch:
            raise RuntimeError("kernel blew up")
        return list(batch)

    processor = ReplicaProcessor(max_concurrent_workers=2, batch_size=5)
    with pytest.raises(BatchFailure) as excinfo:
        await processor.process_replicas(failing, 20)
    assert excinfo.value.context["first_replica"] == 10
    assert excinfo.value.context["error"] == "RuntimeError"


@pytest.mark.asyncio
async def test_length_mismatch_is_a_failure():
    processor = ReplicaProcessor(max_concurrent_workers=1, batch_size=4)
    with pytest.raises(BatchFailure):
        await processor.process_replicas(lambda batch: [0], 8)


def test_run_replicas_wrapper():
    assert run_replicas(squares, 11, workers=2, batch_size=3) == [i * i for i in range(11)]
