"""Distributional and temporal diagnostics of a return series.

Kurtosis separates heavy tails from the Gaussian reference 3; the sum of
the first 10 absolute-return autocorrelations measures volatility
clustering. Together they explain which surrogate family a rejected series
resembles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["DiagnosticsRecord", "kurtosis", "acf_abs_returns", "vol_clustering", "compute_diagnostics"]

CLUSTERING_LAGS = 10


@dataclass(frozen=True)
class DiagnosticsRecord:
    kurtosis: float
    acf_abs: tuple[float, ...]
    vol_clustering: float
    n: int

    def to_dict(self) -> dict:
        return {
            "kurtosis": self.kurtosis,
            "acf_abs": list(self.acf_abs),
            "vol_clustering": self.vol_clustering,
            "n": self.n,
        }


def kurtosis(returns) -> float:
    """Raw (non-excess) kurtosis m4 / m2^2 with population moments.

    Sums use math.fsum, which rounds the exact sum once, so the result is
    bitwise invariant under permutation of the input (shuffle invariance).
    Deviations are normalized by their maximum before squaring; kurtosis is
    scale invariant and the raw fourth power underflows to zero for inputs
    below ~1e-77, turning m4 / m2^2 into 0/0.
    """
    x = np.asarray(returns, dtype=np.float64)
    if x.ndim != 1 or x.size < 4:
        raise ValueError("need at least 4 observations")
    if not np.isfinite(x).all():
        raise ValueError("returns contain non-finite values")
    mean = math.fsum(x) / x.size
    d = x - mean
    scale = float(np.max(np.abs(d)))
    if scale == 0.0:
        raise ValueError("constant input has no kurtosis")
    d2 = (d / scale) ** 2
    m2 = math.fsum(d2) / x.size
    m4 = math.fsum(d2 * d2) / x.size
    return m4 / m2**2


def acf_abs_returns(returns, max_lag: int = CLUSTERING_LAGS) -> np.ndarray:
    """Autocorrelation of |returns| at lags 1..max_lag, biased estimator
    (sums divided by n and by the lag-0 autocovariance)."""
    x = np.abs(np.asarray(returns, dtype=np.float64))
    if max_lag < 1:
        raise ValueError("max_lag >= 1 required")
    if x.size <= max_lag + 1:
        raise ValueError(f"need more than {max_lag + 1} observations for {max_lag} lags")
    if not np.isfinite(x).all():
        raise ValueError("returns contain non-finite values")
    xc = x - x.mean()
    scale = float(np.max(np.abs(xc)))
    if scale == 0.0:
        raise ValueError("constant |returns|, autocorrelation undefined")
    xc = xc / scale  # correlations are scale free; avoids underflow of xc @ xc
    c0 = float(xc @ xc) / x.size
    acf = np.empty(max_lag)
    for k in range(1, max_lag + 1):
        acf[k - 1] = float(xc[:-k] @ xc[k:]) / x.size / c0
    return acf


def vol_clustering(returns) -> float:
    """Sum of the first 10 absolute-return autocorrelations."""
    return float(acf_abs_returns(returns, CLUSTERING_LAGS).sum())


def compute_diagnostics(returns, max_lag: int = CLUSTERING_LAGS) -> DiagnosticsRecord:
    x = np.asarray(returns, dtype=np.float64)
    acf = acf_abs_returns(x, max_lag)
    clustering = float(acf[:CLUSTERING_LAGS].sum()) if max_lag >= CLUSTERING_LAGS else float(acf.sum())
    return DiagnosticsRecord(
        kurtosis=kurtosis(x),
        acf_abs=tuple(float(a) for a in acf),
        vol_clustering=clustering,
        n=int(x.size),
    )
