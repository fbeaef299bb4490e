# Copyright (C) 2024-2025, Pyronear.

# This program is licensed under the Apache License 2.0.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0> for full license details.

import numpy as np

__all__ = ["derive_key", "keyed_stream", "random_bit_rows", "stream"]

# One Philox counter step yields four 64-bit words
WORDS_PER_STEP = 4
BITS_PER_STEP = 64 * WORDS_PER_STEP


def derive_key(*entropy: int) -> np.ndarray:
    """128-bit Philox key from a master seed and stream coordinates."""
    if len(entropy) == 0 or any(int(e) < 0 for e in entropy):
        raise ValueError(f"seeds and stream coordinates must be non-negative integers, got {entropy}")
    return np.random.SeedSequence([int(e) for e in entropy]).generate_state(2, dtype=np.uint64)


def stream(*entropy: int, offset: int = 0) -> np.random.Generator:
    """
    Counter-based generator keyed on `entropy`; `offset` selects an independent sub-stream.

    Args:
        entropy: master seed followed by stream coordinates (e.g. pair index)
        offset: sub-stream index (e.g. resample index), placed in the top counter word

    Returns:
        np.random.Generator: backed by Philox
    """
    return keyed_stream(derive_key(*entropy), offset)


def keyed_stream(key: np.ndarray, offset: int = 0) -> np.random.Generator:
    """Sub-stream `offset` of a derived key; equal to `stream(*entropy, offset=offset)` for that key."""
    return np.random.Generator(np.random.Philox(key=key, counter=int(offset) << 192))


def random_bit_rows(key: np.ndarray, start_row: int, n_rows: int, n_bits: int) -> np.ndarray:
    """
    Rows `start_row .. start_row + n_rows` of a boolean matrix addressed by (key, row, column).

    Each row owns a fixed block of Philox counters, so any split of the rows into chunks
    reproduces the same bits.
    """
    steps_per_row = -(-n_bits // BITS_PER_STEP)
    words_per_row = steps_per_row * WORDS_PER_STEP
    bitgen = np.random.Philox(key=key, counter=start_row * steps_per_row)
    raw = bitgen.random_raw(n_rows * words_per_row).astype("<u8").reshape(n_rows, words_per_row)
    bits = np.unpackbits(raw.view(np.uint8), axis=1, bitorder="little")
    return bits[:, :n_bits].astype(bool)


# Purpose tags keep the random streams of different procedures apart for the same master seed
NAIVE_SWAPS = 1
METRIC_SWAPS = 2
ABLATION_SUBSETS = 3
BOOTSTRAP_SEGMENTS = 4
BOOTSTRAP_SIGNS = 5
