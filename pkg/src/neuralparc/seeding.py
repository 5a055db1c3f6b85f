"""Deterministic seed derivation for independent random streams."""

from __future__ import annotations

import numpy as np


def derive_seed(master: int, *salts: int) -> int:
    """A child seed uniquely determined by the master seed and salts.

    Built on ``numpy.random.SeedSequence``, whose hashing is specified and
    stable across platforms and numpy versions.
    """
    ss = np.random.SeedSequence([int(master), *(int(s) for s in salts)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
