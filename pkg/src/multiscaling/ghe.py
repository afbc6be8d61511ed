"""Generalised Hurst exponent estimation and the WLS multiscaling proxy.

The pipeline is: raw structure function Xi(tau, q), normalisation by the
tau = 1 row and q-th root, per-q no-intercept log-log fit giving H(q), then
a weighted least-squares line H(q) = A + B q whose slope B is the
multiscaling proxy (B = 0 for uniscaling, B < 0 when moments of higher
order scale relatively slower).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .processes import PathSeries

__all__ = [
    "DegenerateSeriesError",
    "MomentGrid",
    "GheCurve",
    "GheResult",
    "structure_function",
    "normalize_standardize",
    "fit_hq",
    "fit_hq_intercept",
    "fit_multiscaling_proxy",
    "estimate_ghe",
]

SE_FLOOR = 1e-12  # keeps WLS weights finite when a fit is exact


class DegenerateSeriesError(ValueError):
    """A moment estimate vanished (constant path segments or short input)."""


@dataclass(frozen=True)
class MomentGrid:
    """Raw or standardized moment estimates Xi over (taus x qs)."""

    taus: np.ndarray
    qs: np.ndarray
    xi: np.ndarray
    standardized: bool = False

    def __post_init__(self) -> None:
        taus = np.asarray(self.taus, dtype=np.int64)
        qs = np.asarray(self.qs, dtype=np.float64)
        xi = np.asarray(self.xi, dtype=np.float64)
        if taus.ndim != 1 or taus.size == 0 or taus[0] < 1 or np.any(np.diff(taus) <= 0):
            raise ValueError("taus must be strictly increasing integers >= 1")
        if qs.ndim != 1 or qs.size == 0 or qs[0] <= 0 or np.any(np.diff(qs) <= 0):
            raise ValueError("qs must be strictly increasing and positive")
        if xi.shape != (taus.size, qs.size):
            raise ValueError("xi must be (len(taus), len(qs))")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "qs", qs)
        object.__setattr__(self, "xi", xi)


@dataclass(frozen=True)
class GheCurve:
    """Per-q records of the no-intercept scaling fit."""

    qs: np.ndarray
    hq: np.ndarray
    hq_se: np.ndarray
    r2: np.ndarray

    def hq_at(self, q: float) -> float:
        idx = np.flatnonzero(np.isclose(self.qs, q, rtol=0.0, atol=1e-9))
        if idx.size == 0:
            raise KeyError(f"q = {q} is not on the estimated grid")
        return float(self.hq[idx[0]])


@dataclass(frozen=True)
class GheResult:
    """GHE curve plus the WLS line summary and the grids that produced it."""

    curve: GheCurve
    a: float | None
    b: float | None
    b_se: float | None
    taus: np.ndarray

    @property
    def qs(self) -> np.ndarray:
        return self.curve.qs

    def to_dict(self) -> dict:
        return {
            "q": self.curve.qs.tolist(),
            "hq": self.curve.hq.tolist(),
            "hq_se": self.curve.hq_se.tolist(),
            "r2": self.curve.r2.tolist(),
            "A": self.a,
            "B": self.b,
            "B_se": self.b_se,
            "taus": [int(self.taus[0]), int(self.taus[-1])],
        }


def structure_function(path: PathSeries | np.ndarray, taus, qs) -> MomentGrid:
    """Raw moments Xi(tau, q) = mean_i |X((i+1)tau) - X(i tau)|^q over the
    N_tau = floor(len/tau) - 1 non-overlapping increments starting at index 0.
    """
    x = path.values if isinstance(path, PathSeries) else np.asarray(path, dtype=np.float64)
    taus = np.asarray(taus, dtype=np.int64)
    qs = np.asarray(qs, dtype=np.float64)
    if not np.isfinite(x).all():
        raise ValueError("path contains non-finite values")
    if taus.size and 2 * int(taus.max()) > x.size:
        raise ValueError(f"max tau {taus.max()} too large for length {x.size}")
    # when all q are integer multiples of the smallest (the tuned grids
    # always are), |d|^{k q0} comes from cumulative products of |d|^{q0},
    # which is several times cheaper than the exp(q log|d|) matrix
    ratio = qs / qs[0]
    ks = np.rint(ratio).astype(np.int64)
    use_powers = bool(np.abs(ratio - ks).max() < 1e-9) and ks[-1] <= 64
    xi = np.empty((taus.size, qs.size))
    for i, tau in enumerate(taus):
        n_tau = x.size // tau - 1
        d = x[tau : (n_tau + 1) * tau : tau] - x[: n_tau * tau : tau]
        if use_powers:
            base = np.abs(d) ** qs[0]
            acc = base.copy()
            col = 0
            if ks[0] == 1:
                xi[i, 0] = acc.mean()
                col = 1
            for k in range(2, ks[-1] + 1):
                acc *= base
                if col < ks.size and ks[col] == k:
                    xi[i, col] = acc.mean()
                    col += 1
        else:
            with np.errstate(divide="ignore"):
                log_abs = np.log(np.abs(d))
            # mean(|d|^q) via exp(q log|d|); zero increments contribute 0
            xi[i] = np.exp(log_abs[:, None] * qs[None, :]).mean(axis=0)
    if (xi == 0.0).any():
        raise DegenerateSeriesError("degenerate input: a moment estimate is exactly zero")
    return MomentGrid(taus=taus, qs=qs, xi=xi)


def normalize_standardize(grid: MomentGrid) -> MomentGrid:
    """Scale each column by its tau = 1 value and take the q-th root."""
    if grid.taus[0] != 1:
        raise ValueError("tau = 1 must be on the grid to normalise")
    base = grid.xi[0]
    if (base <= 0.0).any():
        raise DegenerateSeriesError("Xi(1, q) must be positive")
    xi = (grid.xi / base) ** (1.0 / grid.qs)
    return MomentGrid(taus=grid.taus, qs=grid.qs, xi=xi, standardized=True)


def fit_hq(grid: MomentGrid) -> GheCurve:
    """Per-q no-intercept regression of log Xi on log tau.

    H(q) = sum(x y) / sum(x^2); the residual-based standard error uses
    n - 1 degrees of freedom and R^2 is the uncentred version, both as
    appropriate for a through-the-origin fit.
    """
    if not grid.standardized:
        raise ValueError("fit_hq expects a standardized grid")
    if grid.taus.size < 3:
        raise ValueError("need at least 3 tau points")
    x = np.log(grid.taus.astype(np.float64))
    y = np.log(grid.xi)  # (ntau, nq)
    sxx = float(x @ x)
    hq = (x @ y) / sxx
    resid = y - x[:, None] * hq[None, :]
    ssr = (resid**2).sum(axis=0)
    n = grid.taus.size
    hq_se = np.sqrt(ssr / ((n - 1) * sxx))
    np.maximum(hq_se, SE_FLOOR, out=hq_se)
    syy = (y**2).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        r2 = np.where(syy > 0.0, 1.0 - ssr / syy, 1.0)
    return GheCurve(qs=grid.qs.copy(), hq=hq, hq_se=hq_se, r2=r2)


def fit_hq_intercept(grid: MomentGrid) -> GheCurve:
    """Diagnostic variant: intercept regression on the raw (unnormalised)
    moments, slope q H(q), n - 2 degrees of freedom. Never feeds the tests.
    """
    if grid.standardized:
        raise ValueError("intercept diagnostic runs on the raw grid")
    if grid.taus.size < 3:
        raise ValueError("need at least 3 tau points")
    x = np.log(grid.taus.astype(np.float64))
    y = np.log(grid.xi)
    n = grid.taus.size
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = (xc @ y) / sxx
    intercept = y.mean(axis=0) - slope * x.mean()
    resid = y - (intercept[None, :] + x[:, None] * slope[None, :])
    ssr = (resid**2).sum(axis=0)
    se_slope = np.sqrt(ssr / ((n - 2) * sxx))
    yc = y - y.mean(axis=0)
    syy = (yc**2).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        r2 = np.where(syy > 0.0, 1.0 - ssr / syy, 1.0)
    hq = slope / grid.qs
    hq_se = np.maximum(se_slope / grid.qs, SE_FLOOR)
    return GheCurve(qs=grid.qs.copy(), hq=hq, hq_se=hq_se, r2=r2)


def fit_multiscaling_proxy(curve: GheCurve) -> tuple[float, float, float]:
    """WLS line H(q) = A + B q with weights 1/se^2; returns (A, B, se_B)."""
    qs, hq, se = curve.qs, curve.hq, curve.hq_se
    if qs.size < 2 or np.unique(qs).size < 2:
        raise ValueError("need at least 2 distinct q points for the WLS line")
    w = 1.0 / se**2
    if not np.isfinite(w).all():
        raise ValueError("non-finite WLS weights")
    sw = w.sum()
    swq = (w * qs).sum()
    swqq = (w * qs * qs).sum()
    swh = (w * hq).sum()
    swqh = (w * qs * hq).sum()
    delta = sw * swqq - swq**2
    if delta <= 0.0:
        raise ValueError("collinear q grid, WLS line undefined")
    b = (sw * swqh - swq * swh) / delta
    a = (swqq * swh - swq * swqh) / delta
    b_se = float(np.sqrt(sw / delta))
    return float(a), float(b), b_se


def estimate_ghe(path: PathSeries | np.ndarray, taus, qs) -> GheResult:
    """Full estimator: structure function, standardisation, per-q fits, WLS line."""
    grid = normalize_standardize(structure_function(path, taus, qs))
    curve = fit_hq(grid)
    if curve.qs.size >= 2:
        a, b, b_se = fit_multiscaling_proxy(curve)
    else:
        a = b = b_se = None
    return GheResult(curve=curve, a=a, b=b, b_se=b_se, taus=grid.taus)
