"""Named random streams derived from a single 64-bit seed."""
import zlib

import numpy as np


def stream(seed, name):
    """Independent generator for ``name`` under ``seed``.

    The same (seed, name) always yields the same sequence, and different
    names never share state.
    """
    key = zlib.crc32(name.encode("utf-8"))
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(key,))
    return np.random.default_rng(ss)
