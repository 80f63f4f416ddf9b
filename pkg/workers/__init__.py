"""Worker pool for concurrent replica processing."""

from workers.replica_processor import ReplicaProcessor, run_replicas, split_batches

__all__ = [
    "ReplicaProcessor",
    "run_replicas",
    "split_batches",
]
