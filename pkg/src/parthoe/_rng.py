"""Seed splitting.

Every random stream in the package is derived from one integer seed plus a
purpose string and optional integer keys::

    SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, crc32(purpose), *keys])

so two stages never share a stream and adding a stage does not shift the
others.
"""

import zlib

import numpy as np


def derive_rng(seed, purpose, *keys):
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(purpose.encode("utf-8"))]
    entropy.extend(int(k) for k in keys)
    return np.random.default_rng(np.random.SeedSequence(entropy))
