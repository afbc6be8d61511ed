"""Path simulators: fBm, rough Bergomi, MRW, FLSM, and the driving noises.

Every simulator is a pure function of (params, RngSpec): same inputs, same
path, regardless of scheduling. Heavy per-parameter tables (circulant
eigenvalues, convolution kernels) are cached read-only so concurrent workers
can share them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve

from .rng import RngSpec

__all__ = [
    "EmbeddingError",
    "PathSeries",
    "FbmParams",
    "RBergomiParams",
    "MrwParams",
    "FlsmParams",
    "gaussian_noise",
    "stable_noise",
    "simulate_fbm",
    "simulate_rbergomi",
    "simulate_rbergomi_exact",
    "simulate_mrw",
    "simulate_flsm",
]


class EmbeddingError(RuntimeError):
    """Circulant embedding produced negative eigenvalues beyond tolerance."""


# ---------------------------------------------------------------------------
# core types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathSeries:
    """A simulated (or loaded) path: level values plus the increments that
    built it.

    ``increments`` defaults to ``diff(values)`` but simulators and surrogate
    builders pass the exact increment array they summed, so that
    increment-level contracts (bitwise multiset preservation under
    shuffling) are well defined despite float rounding in the partial sums.
    """

    values: np.ndarray
    meta: dict
    increments: np.ndarray | None = None

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("path needs at least 2 values")
        if not np.isfinite(v).all():
            raise ValueError("path contains non-finite values")
        object.__setattr__(self, "values", v)
        inc = self.increments
        if inc is None:
            inc = np.diff(v)
        else:
            inc = np.asarray(inc, dtype=np.float64)
            if inc.shape != (v.size - 1,):
                raise ValueError("increments length must be len(values) - 1")
        object.__setattr__(self, "increments", inc)

    @property
    def n(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class FbmParams:
    hurst: float
    n: int
    scale: float = 1.0  # increment SD at lag 1

    def __post_init__(self) -> None:
        if not (0.0 < self.hurst < 1.0):
            raise ValueError(f"hurst must lie in (0,1), got {self.hurst}")
        if self.n < 2:
            raise ValueError("n >= 2 required")
        if self.scale <= 0.0:
            raise ValueError("scale > 0 required")


@dataclass(frozen=True)
class RBergomiParams:
    # dt controls how much the t^{2H} vol-of-vol envelope accumulates over
    # the simulated window, i.e. the strength of volatility clustering in
    # the returns. 6e-4 is calibrated so that at H near 0 the apparent
    # multiscaling is tail-dominated while at H ~ 0.2 the clustering is
    # strong enough for the shuffle test to attribute it temporally.
    # Coarser daily grids (1/252) over thousands of steps make the returns
    # grossly nonstationary and are not a sensible default here.
    hurst: float
    n: int
    xi0: float = 0.1
    eta: float = 1.9
    rho: float = -0.9
    dt: float = 6e-4

    def __post_init__(self) -> None:
        if not (0.0 < self.hurst <= 0.5):
            raise ValueError(f"hurst must lie in (0, 0.5], got {self.hurst}")
        if self.n < 2:
            raise ValueError("n >= 2 required")
        if self.xi0 <= 0.0:
            raise ValueError("xi0 > 0 required")
        if self.eta < 0.0:
            raise ValueError("eta >= 0 required")
        if not (-1.0 <= self.rho <= 1.0):
            raise ValueError("rho must lie in [-1, 1]")
        if self.dt <= 0.0:
            raise ValueError("dt > 0 required")


@dataclass(frozen=True)
class MrwParams:
    lam: float
    n: int
    large_scale: int | None = None  # decorrelation scale L, defaults to n
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.lam < 0.0:
            raise ValueError("lambda >= 0 required")
        if self.n < 2:
            raise ValueError("n >= 2 required")
        if self.large_scale is None:
            object.__setattr__(self, "large_scale", self.n)
        if not (1 < self.large_scale <= self.n):
            raise ValueError("large_scale must satisfy 1 < L <= n")
        if self.sigma <= 0.0:
            raise ValueError("sigma > 0 required")


@dataclass(frozen=True)
class FlsmParams:
    alpha: float
    hurst: float
    n: int
    kernel_cutoff: int | None = None  # truncation length, defaults to n

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 2.0):
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not (0.0 < self.hurst < 1.0):
            raise ValueError(f"hurst must lie in (0,1), got {self.hurst}")
        if self.n < 2:
            raise ValueError("n >= 2 required")
        if self.memory_exponent <= -1.0:
            raise ValueError(
                f"d = hurst - 1/alpha = {self.memory_exponent:.4f} <= -1 is outside the model"
            )
        if self.kernel_cutoff is None:
            object.__setattr__(self, "kernel_cutoff", self.n)
        if self.kernel_cutoff < 1:
            raise ValueError("kernel_cutoff >= 1 required")

    @property
    def memory_exponent(self) -> float:
        return self.hurst - 1.0 / self.alpha


def _meta(kind: str, params, rng: RngSpec, **flags) -> dict:
    m = {"kind": kind, "params": asdict(params), "rng": rng.to_dict()}
    m.update(flags)
    return m


# ---------------------------------------------------------------------------
# noise
# ---------------------------------------------------------------------------


def gaussian_noise(rng: RngSpec, n: int) -> np.ndarray:
    """n i.i.d. standard normal variates, deterministic in rng."""
    if n < 1:
        raise ValueError("n >= 1 required")
    return rng.generator().standard_normal(n)


def stable_noise(rng: RngSpec, alpha: float, n: int) -> np.ndarray:
    """Symmetric alpha-stable variates, unit scale, Chambers-Mallows-Stuck.

    Scale convention: S(alpha, beta=0, scale=1), so alpha=2 gives a Gaussian
    with variance 2 and alpha=1 gives a standard Cauchy.
    """
    if not (0.0 < alpha <= 2.0):
        raise ValueError(f"alpha must lie in (0, 2], got {alpha}")
    if n < 1:
        raise ValueError("n >= 1 required")
    g = rng.generator()
    phi = g.uniform(-np.pi / 2.0, np.pi / 2.0, n)
    w = g.exponential(1.0, n)
    if alpha == 1.0:
        return np.tan(phi)
    a = alpha * phi
    return (
        np.sin(a)
        / np.cos(phi) ** (1.0 / alpha)
        * (np.cos(phi - a) / w) ** ((1.0 - alpha) / alpha)
    )


# ---------------------------------------------------------------------------
# circulant embedding (shared by fBm and MRW)
# ---------------------------------------------------------------------------


def _embed_eigenvalues(acov: np.ndarray) -> np.ndarray:
    """Eigenvalues of the circulant embedding of a stationary autocovariance.

    acov holds gamma(0..m); the embedded first row has length 2m.
    """
    row = np.concatenate([acov, acov[-2:0:-1]])
    return np.fft.fft(row).real


def _clip_eigenvalues(lam: np.ndarray, what: str) -> tuple[np.ndarray, bool]:
    # clipping policy: tiny negatives (>= -1e-10) are numerical noise and are
    # zeroed silently; moderate ones (>= -1e-6 * max) are zeroed with a
    # warning flag; anything worse means the covariance is not embeddable.
    worst = float(lam.min())
    if worst >= 0.0:
        return lam, False
    if worst >= -1e-10:
        lam = np.clip(lam, 0.0, None)
        return lam, False
    if worst >= -1e-6 * float(lam.max()):
        warnings.warn(
            f"{what}: clipped negative circulant eigenvalues (worst {worst:.3e})",
            RuntimeWarning,
        )
        return np.clip(lam, 0.0, None), True
    raise EmbeddingError(f"{what}: covariance not embeddable, worst eigenvalue {worst:.3e}")


def _circulant_gaussian(lam: np.ndarray, g: np.random.Generator) -> np.ndarray:
    """One length-m stationary Gaussian sample from embedding eigenvalues (length 2m)."""
    big = lam.size
    m = big // 2
    z = g.standard_normal(big)
    w = np.empty(big, dtype=np.complex128)
    w[0] = z[0]
    w[m] = z[1]
    if m > 1:
        w[1:m] = (z[2 : m + 1] + 1j * z[m + 1 :]) / np.sqrt(2.0)
        w[m + 1 :] = np.conj(w[1:m][::-1])
    return np.fft.fft(np.sqrt(lam / big) * w).real[:m]


@lru_cache(maxsize=64)
def _fgn_eigenvalues(hurst: float, m: int) -> tuple[np.ndarray, bool]:
    k = np.arange(m + 1, dtype=np.float64)
    two_h = 2.0 * hurst
    acov = 0.5 * ((k + 1.0) ** two_h - 2.0 * k**two_h + np.abs(k - 1.0) ** two_h)
    lam, clipped = _clip_eigenvalues(_embed_eigenvalues(acov), "fgn embedding")
    lam.flags.writeable = False
    return lam, clipped


def simulate_fbm(params: FbmParams, rng: RngSpec) -> PathSeries:
    """Fractional Brownian motion via circulant embedding of the increment
    autocovariance gamma(k) = (nu^2/2)(|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}).

    Returns a length-n path starting at 0 whose increments are stationary
    fractional Gaussian noise with increment SD ``scale`` at lag 1.
    """
    lam, clipped = _fgn_eigenvalues(params.hurst, params.n - 1)
    fgn = _circulant_gaussian(lam, rng.generator()) * params.scale
    values = np.empty(params.n)
    values[0] = 0.0
    np.cumsum(fgn, out=values[1:])
    return PathSeries(
        values=values,
        increments=fgn,
        meta=_meta("fbm", params, rng, eigenvalue_clipped=clipped),
    )


# ---------------------------------------------------------------------------
# multifractal random walk
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _mrw_eigenvalues(lam_sq: float, large_scale: int, m: int) -> tuple[np.ndarray, bool]:
    k = np.arange(m + 1, dtype=np.float64)
    acov = lam_sq * np.log(np.maximum(large_scale / (k + 1.0), 1.0))
    lam, clipped = _clip_eigenvalues(_embed_eigenvalues(acov), "mrw embedding")
    lam.flags.writeable = False
    return lam, clipped


def simulate_mrw(params: MrwParams, rng: RngSpec) -> PathSeries:
    """Multifractal random walk: increments eps_k * exp(omega_k) with
    log-normal cascade weights.

    omega is stationary Gaussian with Cov(omega_i, omega_j) =
    lambda^2 * ln+(L/(|i-j|+1)) and mean -lambda^2 * ln(L), which makes
    E[exp(2 omega)] = 1 so the cascade does not inflate the unit-lag variance.
    """
    m = params.n - 1
    g = rng.generator()
    eps = g.standard_normal(m) * params.sigma
    lam, clipped = _mrw_eigenvalues(params.lam**2, params.large_scale, m)
    omega = _circulant_gaussian(lam, g) - params.lam**2 * math.log(params.large_scale)
    inc = eps * np.exp(omega)
    values = np.empty(params.n)
    values[0] = 0.0
    np.cumsum(inc, out=values[1:])
    return PathSeries(
        values=values,
        increments=inc,
        meta=_meta("mrw", params, rng, eigenvalue_clipped=clipped),
    )


# ---------------------------------------------------------------------------
# fractional Levy stable motion
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _flsm_kernel(d: float, cutoff: int) -> np.ndarray:
    j = np.arange(1, cutoff, dtype=np.float64)
    ker = np.empty(cutoff, dtype=np.float64)
    ker[0] = 1.0  # the j=0 weight is 1 by definition, not (1 - 0^d)
    ker[1:] = (j + 1.0) ** d - j**d
    ker.flags.writeable = False
    return ker


def simulate_flsm(params: FlsmParams, rng: RngSpec) -> PathSeries:
    """Fractional Levy stable motion: increments are a truncated causal
    moving average of symmetric alpha-stable noise with kernel weights
    g_0 = 1, g_j = (j+1)^d - j^d, d = H - 1/alpha.

    H = 1/alpha (d = 0) degenerates to i.i.d. stable noise.
    """
    m = params.n - 1
    cutoff = params.kernel_cutoff
    d = params.memory_exponent
    noise = stable_noise(rng, params.alpha, m + cutoff - 1)
    if d == 0.0:
        inc = noise[cutoff - 1 :].copy()
    else:
        ker = _flsm_kernel(d, cutoff)
        inc = fftconvolve(noise, ker, mode="valid")
    values = np.empty(params.n)
    values[0] = 0.0
    np.cumsum(inc, out=values[1:])
    if not np.isfinite(values).all():
        raise FloatingPointError("flsm path overflowed, alpha too small for this length")
    return PathSeries(values=values, increments=inc, meta=_meta("flsm", params, rng))


# ---------------------------------------------------------------------------
# rough Bergomi
# ---------------------------------------------------------------------------


@lru_cache(maxsize=32)
def _hybrid_tables(alpha: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Riemann-sum kernel weights and their cumulative squares, kappa = 1.

    Weight k (k = 2..m) is b_k^alpha with b_k the optimal evaluation point
    ((k^{a+1} - (k-1)^{a+1})/(a+1))^{1/a}; only b_k^alpha is ever needed,
    which stays finite as alpha -> 0.
    """
    k = np.arange(2, m + 1, dtype=np.float64)
    g = (k ** (alpha + 1.0) - (k - 1.0) ** (alpha + 1.0)) / (alpha + 1.0)
    kernel = np.zeros(m)
    kernel[1:] = g
    cum_g2 = np.concatenate([[0.0], np.cumsum(g**2)])  # index i-1: sum over k<=i
    kernel.flags.writeable = False
    cum_g2.flags.writeable = False
    return kernel, cum_g2


def _volterra_and_drivers(
    params: RBergomiParams, g: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Hybrid-scheme Volterra process Y at t_1..t_{n-1} plus the Brownian
    increments dW that drive both Y and the price.

    Y is rescaled per grid point so Var(Y_i) = t_i^{2H} exactly, matching
    the exp-compensator convention.
    """
    m = params.n - 1
    alpha = params.hurst - 0.5
    dt = params.dt
    # exact joint draw of (dW_i, W2_i) on the most recent interval:
    # Cov = [[dt, c12], [c12, c22]]
    c12 = dt ** (alpha + 1.0) / (alpha + 1.0)
    c22 = dt ** (2.0 * alpha + 1.0) / (2.0 * alpha + 1.0)
    l11 = math.sqrt(dt)
    l21 = c12 / l11
    l22 = math.sqrt(max(c22 - c12**2 / dt, 0.0))
    z = g.standard_normal((m, 2))
    dw = l11 * z[:, 0]
    w2 = l21 * z[:, 0] + l22 * z[:, 1]

    kernel, cum_g2 = _hybrid_tables(alpha, m)
    if m > 1:
        conv = fftconvolve(kernel, dw)[:m]
    else:
        conv = np.zeros(1)
    y = w2 + dt**alpha * conv

    t = dt * np.arange(1, params.n)
    var_y = 2.0 * params.hurst * (c22 + dt ** (2.0 * alpha + 1.0) * cum_g2)
    y *= t**params.hurst / np.sqrt(var_y / (2.0 * params.hurst))  # sqrt(2H) folded in
    return y, dw


def _advance_logprice(
    params: RBergomiParams, y: np.ndarray, dw: np.ndarray, g: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    t = params.dt * np.arange(params.n)
    y_full = np.empty(params.n)
    y_full[0] = 0.0
    y_full[1:] = y
    v = params.xi0 * np.exp(params.eta * y_full - 0.5 * params.eta**2 * t ** (2.0 * params.hurst))
    dw_perp = g.standard_normal(params.n - 1) * math.sqrt(params.dt)
    rho_bar = math.sqrt(1.0 - params.rho**2)
    vol = np.sqrt(v[:-1])
    ds = -0.5 * v[:-1] * params.dt + vol * (params.rho * dw + rho_bar * dw_perp)
    s = np.empty(params.n)
    s[0] = 0.0
    np.cumsum(ds, out=s[1:])
    return s, ds, v


def simulate_rbergomi(params: RBergomiParams, rng: RngSpec) -> tuple[PathSeries, np.ndarray]:
    """Rough Bergomi log-price path plus its spot-variance series.

    The variance driver is the Riemann-Liouville Volterra process built from
    the SAME Brownian increments that drive the price (hybrid scheme), so
    rho couples price and variance. v_k = xi0 exp(eta Y_k - eta^2/2 t^{2H}),
    and the log-price advances by the left-point Euler step
    ds = -v/2 dt + sqrt(v) (rho dW + sqrt(1-rho^2) dW_perp).
    """
    g = rng.generator()
    y, dw = _volterra_and_drivers(params, g)
    s, ds, v = _advance_logprice(params, y, dw, g)
    if not (np.isfinite(s).all() and np.isfinite(v).all()):
        raise FloatingPointError("rbergomi produced non-finite output")
    series = PathSeries(values=s, increments=ds, meta=_meta("rbergomi", params, rng))
    return series, v


def simulate_rbergomi_exact(params: RBergomiParams, rng: RngSpec) -> tuple[PathSeries, np.ndarray]:
    """Exact-covariance rough Bergomi via joint Cholesky of (Y, W).

    O(n^3) setup, capped at n <= 2048; cross-validation reference for the
    hybrid scheme, not for production use.
    """
    from scipy.special import hyp2f1

    if params.n > 2048:
        raise ValueError("exact simulator capped at n <= 2048")
    m = params.n - 1
    h = params.hurst
    t = params.dt * np.arange(1, params.n)
    u = np.minimum.outer(t, t)
    w_max = np.maximum.outer(t, t)
    # Cov(Y_u, Y_v) = min^{2H} * 2H/(H+1/2) * x^{H-1/2} hyp2f1(1, 1/2-H, 3/2+H, x),
    # x = min/max, written via min^{H+1/2} max^{H-1/2}
    x = u / w_max
    cov_yy = (
        u ** (h + 0.5)
        * w_max ** (h - 0.5)
        * hyp2f1(1.0, 0.5 - h, 1.5 + h, x)
        * (2.0 * h / (h + 0.5))
    )
    # Cov(Y_{t_i}, W_{t_j}) = sqrt(2H)/(H+1/2) * (t_i^{H+1/2} - (t_i - min)^{H+1/2})
    ti = t[:, None]
    tj = t[None, :]
    cov_yw = (
        math.sqrt(2.0 * h)
        / (h + 0.5)
        * (ti ** (h + 0.5) - np.maximum(ti - np.minimum(ti, tj), 0.0) ** (h + 0.5))
    )
    cov = np.block([[cov_yy, cov_yw], [cov_yw.T, np.minimum.outer(t, t)]])
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * float(np.trace(cov)) / (2 * m)
        chol = np.linalg.cholesky(cov + jitter * np.eye(2 * m))
    g = rng.generator()
    z = chol @ g.standard_normal(2 * m)
    y, w = z[:m], z[m:]
    dw = np.diff(w, prepend=0.0)
    s, ds, v = _advance_logprice(params, y, dw, g)
    series = PathSeries(values=s, increments=ds, meta=_meta("rbergomi_exact", params, rng))
    return series, v
