"""Counter-based random streams keyed by (master seed, replica index)."""

import numpy as np


SEED_LIMIT = 2 ** 64


def replica_generator(master_seed: int, replica: int) -> np.random.Generator:
    """
    Independent generator for one replica.

    Philox is keyed by the 128-bit pair (master_seed, replica), so any replica
    can be regenerated in isolation without replaying the others.

    Args:
        master_seed: 64-bit experiment seed
        replica: Replica index

    Returns:
        A numpy Generator backed by Philox
    """
    if not 0 <= master_seed < SEED_LIMIT:
        raise ValueError(f"master seed {master_seed} is not a 64-bit unsigned integer")
    if not 0 <= replica < SEED_LIMIT:
        raise ValueError(f"replica index {replica} is not a 64-bit unsigned integer")
    key = np.array([master_seed, replica], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
