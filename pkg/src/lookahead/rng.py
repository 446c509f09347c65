"""Named, splittable random substreams.

Every stochastic stage (synthetic sampling noise, train/test splitting,
bootstrap resampling, ...) draws from its own child of a root seed, so
changing the number of draws in one stage never perturbs another and
results are identical regardless of evaluation order or platform.
"""

from __future__ import annotations

import numpy as np

_U64 = (1 << 64) - 1

# Stream identifiers. New stages get new constants; never renumber.
STREAM_SYNTH_X = 0
STREAM_SYNTH_NOISE = 1
STREAM_SPLIT = 2
STREAM_BOOTSTRAP = 3
STREAM_RESIDUALS = 4


def substream(seed: int, *key: int) -> np.random.Generator:
    """PCG64 generator for the (seed, *key) substream.

    Keys index independent child streams of the same root seed.
    """
    entropy = int(seed) & _U64
    return np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=tuple(key)))


def child_seed(seed: int, *key: int) -> int:
    """Derive a plain integer seed for a nested component from (seed, *key)."""
    entropy = int(seed) & _U64
    return int(np.random.SeedSequence(entropy, spawn_key=tuple(key)).generate_state(1)[0])
