"""Bit-level helpers: index reversal, Gray codes, and stable seed derivation."""

import numpy as np

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def bit_reverse(i: int, width: int) -> int:
    """Reverse the lowest `width` bits of i."""
    r = 0
    for _ in range(width):
        r = (r << 1) | (i & 1)
        i >>= 1
    return r


def gray_code(i):
    """Gray code of integer(s) i: adjacent codes differ in one bit."""
    return i ^ (i >> 1)


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash. Stable across platforms and Python versions."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def derive_seed(master: int, index: int) -> int:
    """Stable sub-seed: FNV-1a over master seed bytes followed by index bytes.

    Used for per-chain and per-sweep-point RNG streams, so changing the number
    of chains or grid points never reshuffles the streams of earlier ones.
    """
    payload = (master & _MASK64).to_bytes(8, "little") + (index & _MASK64).to_bytes(8, "little")
    return fnv1a64(payload)


def popcount(x):
    """Population count for numpy integer arrays (any shape)."""
    x = np.asarray(x)
    if hasattr(np, "bitwise_count"):
        return np.bitwise_count(x)
    # fallback: byte-view lookup
    table = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)
    v = x.astype(np.uint64).view(np.uint8).reshape(x.shape + (8,))
    return table[v].sum(axis=-1)
