"""Counter-based random streams keyed by ``(seed, replicate)``."""

import numpy as np

from .errors import GmcError

U64 = 2**64


def check_seed(seed):
    seed = int(seed)
    if not 0 <= seed < U64:
        raise GmcError("bad-seed", f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def replicate_rng(seed, replicate=0, stream=0):
    """Independent Philox generator for one replicate.

    The stream depends only on its key, so replicates can be generated in
    any order or concurrently with identical results.
    """
    seed = check_seed(seed)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, int(replicate), int(stream)])))
