import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, *names: str | int) -> int:
    """64-bit seed for a named sub-stream of ``seed`` (e.g. ``"walks", fold``)."""
    key = tuple(zlib.crc32(str(n).encode("utf-8")) for n in names)
    ss = np.random.SeedSequence(entropy=seed & _MASK64, spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


def derive_seed32(seed: int, *names: str | int) -> int:
    """Same as :func:`derive_seed`, truncated for MT19937-style seeding."""
    return derive_seed(seed, *names) & 0xFFFFFFFF
