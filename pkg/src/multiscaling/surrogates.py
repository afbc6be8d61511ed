"""Surrogate families for the two-stage test.

Matched fBm surrogates share the original's H(1) and increment scale but
are uniscaling by construction (stage-1 null: no multiscaling). Shuffled
surrogates keep the exact increment multiset but destroy temporal order
(stage-2 null: multiscaling from the marginal distribution alone).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ghe import GheResult
from .processes import FbmParams, PathSeries, simulate_fbm
from .rng import RngSpec

__all__ = ["SurrogateBatch", "matched_fbm", "shuffle_surrogates"]

H1_CLAMP = (0.01, 0.99)


@dataclass(frozen=True)
class SurrogateBatch:
    kind: str  # "matched_fbm" | "shuffled"
    series: tuple[PathSeries, ...]
    source_meta: dict
    rng: RngSpec

    def __post_init__(self) -> None:
        if self.kind not in ("matched_fbm", "shuffled"):
            raise ValueError(f"unknown surrogate kind {self.kind!r}")
        if not self.series:
            raise ValueError("empty surrogate batch")
        n = self.series[0].n
        if any(s.n != n for s in self.series):
            raise ValueError("surrogates must all share the original length")

    def __len__(self) -> int:
        return len(self.series)


def matched_fbm(
    original: PathSeries,
    ghe: GheResult | None,
    count: int,
    rng: RngSpec,
    h1: float | None = None,
) -> SurrogateBatch:
    """count fBm paths with hurst = H(1) of the original and matching
    increment SD at lag 1.

    h1 overrides the H(1) lookup on the GHE grid (needed when the tuned q
    grid stops below 1). H(1) outside (0, 1) is clamped to [0.01, 0.99]
    with a flag in source_meta; scale matching cannot move the B statistic
    (it cancels in the tau = 1 normalisation) but keeps diagnostics
    comparable.
    """
    if count < 1:
        raise ValueError("surrogate count must be >= 1")
    if h1 is None:
        if ghe is None:
            raise ValueError("need either a GheResult with q = 1 on the grid or an explicit h1")
        h1 = ghe.curve.hq_at(1.0)  # KeyError if q=1 absent
    clamped = not (0.0 < h1 < 1.0)
    if clamped:
        h1 = float(np.clip(h1, *H1_CLAMP))
    scale = float(np.std(original.increments))
    if scale <= 0.0:
        raise ValueError("original increments are constant, no scale to match")
    params = FbmParams(hurst=h1, n=original.n, scale=scale)
    series = tuple(simulate_fbm(params, rng.derive(i)) for i in range(count))
    meta = {
        "original": original.meta,
        "h1": h1,
        "h1_clamped": clamped,
        "scale": scale,
    }
    return SurrogateBatch(kind="matched_fbm", series=series, source_meta=meta, rng=rng)


def shuffle_surrogates(original: PathSeries, count: int, rng: RngSpec) -> SurrogateBatch:
    """count reconstructions from unbiased random permutations of the
    original increments.

    The surrogate's increment array IS the permuted original array, so the
    sorted increment multiset is preserved bitwise. Path values are the
    permuted partial sums accumulated in extended precision, with the final
    value pinned to the original's (the telescoping sum is permutation
    invariant; sequential float64 accumulation is not).
    """
    if count < 1:
        raise ValueError("surrogate count must be >= 1")
    if original.n < 3:
        raise ValueError("need at least 3 values to shuffle")
    inc = original.increments
    x0 = float(original.values[0])
    x_last = original.values[-1]
    series = []
    for i in range(count):
        g = rng.derive(i).generator()
        shuffled = inc[g.permutation(inc.size)]
        values = np.empty(original.n)
        values[0] = x0
        values[1:] = (x0 + np.cumsum(shuffled.astype(np.longdouble))).astype(np.float64)
        values[-1] = x_last
        series.append(
            PathSeries(
                values=values,
                increments=shuffled,
                meta={"kind": "shuffled", "source": original.meta, "index": i},
            )
        )
    meta = {"original": original.meta}
    return SurrogateBatch(kind="shuffled", series=tuple(series), source_meta=meta, rng=rng)
