"""Dense fixed-width membership sets packed into little-endian uint64 words.

A set over ``n`` items is a row of ``ceil(n / 64)`` words; bit ``i`` of the row
lives in word ``i // 64`` at position ``i % 64``. Padding bits are always zero,
so rows can be compared, hashed and counted word-wise.
"""

from __future__ import annotations

import numpy as np

WORD_DTYPE = np.dtype("<u8")

# fixed odd multipliers for the row hash; seeded so hashes are stable across runs
_HASH_MULTIPLIERS = np.random.default_rng(0x5EED).integers(
    1, 2**63, size=4096, dtype=np.uint64
) | np.uint64(1)


def n_words(n_items: int) -> int:
    return max(1, (n_items + 63) // 64)


def pack(mask) -> np.ndarray:
    """Pack a boolean array of shape ``(..., n)`` into ``(..., n_words(n))`` words."""
    mask = np.asarray(mask, dtype=bool)
    n = mask.shape[-1]
    width = n_words(n) * 64
    if width != n:
        pad = [(0, 0)] * (mask.ndim - 1) + [(0, width - n)]
        mask = np.pad(mask, pad)
    packed = np.packbits(mask, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view(WORD_DTYPE)


def unpack(bits: np.ndarray, n_items: int) -> np.ndarray:
    bits = np.ascontiguousarray(bits, dtype=WORD_DTYPE)
    flat = np.unpackbits(bits.view(np.uint8), axis=-1, bitorder="little")
    return flat[..., :n_items].astype(bool)


def from_indices(indices, n_items: int) -> np.ndarray:
    mask = np.zeros(n_items, dtype=bool)
    mask[np.asarray(list(indices), dtype=np.int64)] = True
    return pack(mask)


def indices(row: np.ndarray, n_items: int) -> np.ndarray:
    return np.flatnonzero(unpack(row, n_items))


def popcount(bits: np.ndarray) -> np.ndarray:
    return np.bitwise_count(bits).sum(axis=-1, dtype=np.int64)


def contains(rows: np.ndarray, item: int) -> np.ndarray:
    """Boolean per row: does the row contain ``item``."""
    word, offset = divmod(item, 64)
    return ((rows[..., word] >> np.uint64(offset)) & np.uint64(1)).astype(bool)


def subset_of(rows: np.ndarray, superset: np.ndarray) -> np.ndarray:
    """Boolean per row: ``row ⊆ superset``."""
    return ~np.any(rows & ~superset, axis=-1)


def row_hashes(rows: np.ndarray) -> np.ndarray:
    rows = np.atleast_2d(rows)
    width = rows.shape[1]
    if width > _HASH_MULTIPLIERS.size:
        mult = np.resize(_HASH_MULTIPLIERS, width)
    else:
        mult = _HASH_MULTIPLIERS[:width]
    with np.errstate(over="ignore"):
        h = (rows * mult).sum(axis=1, dtype=np.uint64)
        h ^= h >> np.uint64(29)
    return h
