"""Deterministic random number generation.

Every stochastic step in the pipeline draws from an `Rng`: PCG64 for the
uniform stream and a Box-Muller transform on top of it for Gaussians. Both
algorithms are fixed, so a seed yields the same sample stream on every
platform. Child generators are derived from (seed, tokens) so any pipeline
record can be regenerated independently.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["Rng"]


def _token_to_int(token) -> int:
    if isinstance(token, (int, np.integer)):
        return int(token)
    if isinstance(token, str):
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"rng child token must be int or str, got {type(token).__name__}")


class Rng:
    """Seeded generator with uniform, integer and Box-Muller Gaussian draws."""

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def __repr__(self):
        return f"Rng(seed={self.seed})"

    def child(self, *tokens) -> "Rng":
        """Derive an independent generator from this seed and the tokens."""
        material = (self.seed,) + tuple(_token_to_int(t) for t in tokens)
        state = np.random.SeedSequence(material).generate_state(1, np.uint64)
        return Rng(int(state[0]))

    def uniform(self, shape=None) -> np.ndarray:
        """Uniform float64 samples in [0, 1)."""
        return self._gen.random(size=shape)

    def integers(self, low: int, high: int, shape=None) -> np.ndarray:
        """Integers in [low, high)."""
        return self._gen.integers(low, high, size=shape)

    def normal(self, shape=None, sigma: float = 1.0) -> np.ndarray:
        """Zero-mean Gaussian samples via Box-Muller on the uniform stream."""
        count = 1 if shape is None else int(np.prod(shape))
        half = (count + 1) // 2
        # 1 - u keeps the argument of log in (0, 1].
        u1 = 1.0 - self._gen.random(half)
        u2 = self._gen.random(half)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        samples = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:count]
        samples *= sigma
        if shape is None:
            return float(samples[0])
        return samples.reshape(shape)
