"""Random streams.

Every stochastic routine draws from ``numpy.random.Generator(Philox(...))``,
a counter-based bit generator, keyed by a tuple of non-negative integers
through ``SeedSequence``.  Keys in use:

* ``(seed,)``                      synthetic instance generation
* ``(seed, restart)``              restart ``restart`` of a single solve
* ``(seed, K, fold, restart)``     one SA run inside a CV sweep
* ``(seed, 0xB0175)``              fixed-temperature chain of ``validate``

Streams with different key lengths never coincide, so results do not depend
on how work is scheduled.
"""

from __future__ import annotations

import numpy as np


def make_rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


def as_rng(rng) -> np.random.Generator:
    """Accept a Generator, an int seed, or None (seed 0)."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        rng = 0
    return make_rng(rng)
