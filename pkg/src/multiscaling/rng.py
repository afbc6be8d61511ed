"""Seeded RNG contract shared by every simulator and surrogate generator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RngSpec"]


@dataclass(frozen=True)
class RngSpec:
    """Deterministic generator handle: (seed, stream_id) -> one bit stream.

    Identical (seed, stream_id) pairs always reproduce the identical
    sequence; distinct stream_ids give statistically independent streams,
    which is what lets parallel workers and surrogate batches draw without
    coordination.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not (0 <= int(self.stream_id) < 2**64):
            raise ValueError(f"stream_id must be a 64-bit unsigned integer, got {self.stream_id}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.default_rng(ss)

    def derive(self, offset: int) -> "RngSpec":
        """Child spec on stream_id + offset (surrogate i uses derive(i))."""
        return RngSpec(self.seed, int(self.stream_id) + int(offset))

    def to_dict(self) -> dict:
        return {"seed": int(self.seed), "stream_id": int(self.stream_id)}
