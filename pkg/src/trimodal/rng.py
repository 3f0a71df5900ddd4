"""Deterministic random streams built on the SplitMix64 generator.

Every random decision in the package (weight init, synthetic data, batch
shuffling, augmentation noise) is drawn from a `Stream` keyed by a seed plus
a tuple of labels, so any single stream can be reproduced in isolation and in
any other implementation of the same generator.

Generator definition (all arithmetic mod 2^64):

    state_i = stream_seed + i * 0x9E3779B97F4A7C15        (i = 1, 2, 3, ...)
    out_i   = mix64(state_i)

where mix64 is the SplitMix64 finalizer:

    z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27;  z *= 0x94D049BB133111EB
    z ^= z >> 31

Derived quantities:

    uniform in [0, 1):  (out >> 11) * 2^-53
    normal:             Box-Muller on consecutive pairs (u1 in (0, 1], u2 in
                        [0, 1)): z0 = sqrt(-2 ln u1) cos(2 pi u2),
                        z1 = sqrt(-2 ln u1) sin(2 pi u2), emitted in order
    integer in [0, b):  out mod b   (modulo bias is irrelevant at these scales)
    shuffle:            Fisher-Yates, descending index, j = draw mod (i + 1)

Stream seeds are derived from (seed, *key) by folding each key element into
the running state with mix64; strings fold byte by byte (see `_fold`).
"""

from __future__ import annotations

import math

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def mix64(z: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    """SplitMix64 finalizer; accepts a uint64 scalar or array (wraps mod 2^64)."""
    z = np.uint64(z) if not isinstance(z, np.ndarray) else z
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _fold(state: np.uint64, item: int | str) -> np.uint64:
    """Fold one key element into a stream seed."""
    with np.errstate(over="ignore"):
        if isinstance(item, str):
            for b in item.encode("utf-8"):
                state = mix64(state ^ mix64(np.uint64(b) + _GOLDEN))
            return state
        if isinstance(item, (int, np.integer)):
            return mix64(state ^ mix64(np.uint64(int(item) & _MASK64) + _GOLDEN))
    raise TypeError(f"stream key elements must be int or str, got {type(item).__name__}")


class Stream:
    """A deterministic, independently seeded random stream.

    `Stream(seed, "video", 17)` always yields the same sequence, regardless
    of what any other stream has produced.
    """

    def __init__(self, seed: int, *key: int | str):
        state = mix64(np.uint64(int(seed) & _MASK64))
        for item in key:
            state = _fold(state, item)
        self._seed = state
        self._counter = np.uint64(0)

    def u64(self, n: int) -> np.ndarray:
        """Next `n` raw 64-bit outputs."""
        with np.errstate(over="ignore"):
            idx = np.arange(1, n + 1, dtype=np.uint64) + self._counter
            self._counter = self._counter + np.uint64(n)
            states = self._seed + idx * _GOLDEN
        return mix64(states)

    def uniform(self, shape: int | tuple[int, ...] = ()) -> np.ndarray | float:
        """Uniform float64 in [0, 1)."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        out = (self.u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return out.reshape(shape) if shape else float(out[0])

    def normal(self, shape: int | tuple[int, ...] = (), sigma: float = 1.0) -> np.ndarray | float:
        """Standard-normal float64 draws via Box-Muller, scaled by `sigma`."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        pairs = (n + 1) // 2
        raw = self.u64(2 * pairs)
        u1 = ((raw[:pairs] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53  # (0, 1]
        u2 = (raw[pairs:] >> np.uint64(11)).astype(np.float64) * 2.0**-53          # [0, 1)
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(2.0 * math.pi * u2)
        out[1::2] = r * np.sin(2.0 * math.pi * u2)
        out = out[:n] * sigma
        return out.reshape(shape) if shape else float(out[0])

    def integers(self, n: int, bound: int) -> np.ndarray:
        """`n` integers in [0, bound) via modulo reduction."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return (self.u64(n) % np.uint64(bound)).astype(np.int64)

    def shuffle(self, items: list) -> list:
        """Fisher-Yates shuffle; returns a new list, input untouched."""
        out = list(items)
        n = len(out)
        if n < 2:
            return out
        draws = self.u64(n - 1)
        for pos, i in enumerate(range(n - 1, 0, -1)):
            j = int(draws[pos] % np.uint64(i + 1))
            out[i], out[j] = out[j], out[i]
        return out

    def permutation(self, n: int) -> list[int]:
        return self.shuffle(list(range(n)))
