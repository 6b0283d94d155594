"""Deterministic random-stream derivation.

Every chain owns a counter-based stream keyed by
(master_seed, point_index, chain_index, purpose), so results do not depend
on scheduling or on how work is split across threads.  The purpose slot
keeps the tune pass, the formal forward pass, the reverse pass, and data
simulation on disjoint streams.
"""

from __future__ import annotations

import numpy as np

PURPOSE_FORWARD = 0
PURPOSE_TUNE = 1
PURPOSE_REVERSE = 2
PURPOSE_SIMULATE = 3

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def mix64(a: int, b: int) -> int:
    """Deterministic 64-bit mix of two integers."""
    return _splitmix64(_splitmix64(a & _MASK64) ^ ((b & _MASK64) * _GOLDEN & _MASK64))


def chain_stream(master_seed: int, point_index: int, chain_index: int,
                 purpose: int) -> np.random.Generator:
    """Generator for one (data point, chain) pair.

    The Philox key packs a 64-bit mix of (master_seed, point_index) in one
    word and (chain_index, purpose) in the other, so every tuple gets its
    own counter-based stream.
    """
    key = np.array(
        [mix64(master_seed, point_index),
         ((chain_index & ((1 << 56) - 1)) << 8) | (purpose & 0xFF)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def chain_streams(master_seed: int, point_index: int, n_chains: int,
                  purpose: int) -> list[np.random.Generator]:
    return [chain_stream(master_seed, point_index, j, purpose)
            for j in range(n_chains)]


def run_seed(master_seed: int, run_index: int) -> int:
    """Derive a sub-seed for replicate runs (used by repeated sandwiches)."""
    return int(np.random.SeedSequence([master_seed, run_index]).generate_state(1)[0])


class StepDraws:
    """Block-buffered per-step randomness for one chain.

    Each HMC transition consumes one momentum vector and one uniform variate
    from the chain's stream.  Draws are made in blocks to keep generator-call
    overhead off the hot path; consumption order (momentum block, then
    uniform block, repeating) is part of the determinism contract.
    """

    def __init__(self, gen: np.random.Generator, dim: int, block: int = 256):
        self._gen = gen
        self._dim = dim
        self._block = block
        self._pos = block  # trigger refill on first use

    def _refill(self) -> None:
        self._mom = self._gen.standard_normal((self._block, self._dim))
        self._uni = self._gen.uniform(size=self._block)
        self._pos = 0

    def next(self) -> tuple[np.ndarray, float]:
        if self._pos >= self._block:
            self._refill()
        out = self._mom[self._pos], self._uni[self._pos]
        self._pos += 1
        return out
