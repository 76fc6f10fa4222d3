"""Named RNG sub-streams derived from a single run seed.

Every source of randomness in a run flows from one integer seed through a
named sub-stream, so individual stages (weight init, training, sampling)
can be replayed independently without touching the others.
"""

import numpy as np

# Registry of stream names -> fixed sub-stream indices. Stable across
# versions; appending new names is fine, renumbering is not.
STREAMS = {
    "init": 0,
    "train": 1,
    "sample": 2,
    "data": 3,
    "eval": 4,
}


def stream(seed: int, name: str, shard: int | None = None) -> np.random.Generator:
    """Return the generator for the named sub-stream of ``seed``.

    ``shard`` selects an independent sub-sub-stream, used for sharded
    sampling. ``shard=None`` and ``shard=0`` are distinct streams; plain
    un-sharded callers pass ``None``.
    """
    if name not in STREAMS:
        raise KeyError(f"unknown RNG stream {name!r}; known: {sorted(STREAMS)}")
    key = [int(seed), STREAMS[name]]
    if shard is not None:
        key.append(int(shard) + 1)
    return np.random.default_rng(np.random.SeedSequence(key))
