"""Random number plumbing shared by the simulator and the Monte Carlo oracles.

One user-facing seed fans out into disjoint generator domains via
SeedSequence spawn keys, so the simulator and any oracle run with the same
seed never share a stream.  The simulator itself consumes standard
exponentials through ExpStream, a block-buffered wrapper that both the
compiled and the pure-Python event loops drain one value at a time in the
same order; runs are therefore bit-identical across backends.
"""

from __future__ import annotations

import numpy as np

__all__ = ["GENERATOR_ID", "DOMAINS", "seed_sequence", "generator", "spawn_seed", "ExpStream"]

GENERATOR_ID = "pcg64"

DOMAINS = {"sim": 0, "oracle": 1, "sweep": 2}


def seed_sequence(seed: int, domain: str, index: int | None = None) -> np.random.SeedSequence:
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ValueError(f"seed must be a nonnegative integer, got {seed!r}")
    key = (DOMAINS[domain],) if index is None else (DOMAINS[domain], index)
    return np.random.SeedSequence(entropy=seed, spawn_key=key)


def generator(seed: int, domain: str, index: int | None = None) -> np.random.Generator:
    """PCG64 generator for (seed, domain); domains never collide."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, domain, index)))


def spawn_seed(seed: int, domain: str, index: int) -> int:
    """Derive a child seed (for one sweep point, say) from a base seed."""
    return int(seed_sequence(seed, domain, index).generate_state(1, np.uint64)[0])


class ExpStream:
    """Block-buffered standard-exponential draws from one Generator.

    draw() hands out buffered values one at a time and refills in blocks of
    `block` (a full numpy call per value would dominate the event loop).
    The compiled kernel bypasses draw() and walks the same buffer directly,
    calling refill() at exhaustion, so the value sequence is identical
    either way.
    """

    def __init__(self, gen: np.random.Generator, block: int = 1 << 16):
        if block < 1:
            raise ValueError(f"block size must be >= 1, got {block}")
        self._gen = gen
        self._block = block
        self.buf = np.empty(0, dtype=np.float64)
        self.pos = 0

    def refill(self) -> np.ndarray:
        self.buf = self._gen.standard_exponential(self._block)
        self.pos = 0
        return self.buf

    def draw(self) -> float:
        if self.pos >= self.buf.shape[0]:
            self.refill()
        v = self.buf[self.pos]
        self.pos += 1
        return float(v)
