"""Data-driven hyperparameters: moment range from the tail index, scale
range from an R-squared threshold sweep.

Moments |r|^q only converge for q below the stability index alpha of the
increment distribution, so the q grid is capped at a safety margin under an
estimated alpha. The largest usable tau is the biggest candidate whose
worst per-q scaling fit still looks linear (min_q R^2 above threshold).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .ghe import MomentGrid, fit_hq, normalize_standardize, structure_function
from .processes import PathSeries

__all__ = [
    "TuningResult",
    "estimate_tail_index",
    "select_q_range",
    "select_tau_max",
    "default_tau_candidates",
    "tune",
]

Q_STEP = 0.1
ALPHA_FALLBACK = 1.25
TAU_CANDIDATE_POOL = (5, 10, 15, 20, 30, 50, 75, 100, 150, 200, 250)

# McCulloch's symmetric quantile lookup: nu = (x.95 - x.05)/(x.75 - x.25)
# indexed against alpha = 2.0, 1.9, ..., 0.5. Monotone increasing in nu,
# so a single interp recovers alpha; outside the table we clamp.
_NU_TABLE = np.array(
    [2.4388, 2.5120, 2.6080, 2.7369, 2.9115, 3.1480, 3.4635, 3.8824,
     4.4468, 5.2172, 6.3140, 7.9098, 10.4480, 14.8378, 23.4831, 44.2813]
)
_ALPHA_TABLE = np.round(np.arange(2.0, 0.45, -0.1), 10)


@dataclass(frozen=True)
class TuningResult:
    """Selected (q, tau) ranges plus the evidence behind the selection.

    tau_candidates holds (tau_max, min_q R^2) pairs for every candidate
    evaluated; below_threshold marks a selection that never met the
    threshold (best-effort argmax). Tail fields are None when tau selection
    ran standalone.
    """

    q_max: float
    qs: tuple[float, ...]
    tau_max: int
    tau_candidates: tuple[tuple[int, float], ...]
    threshold: float
    below_threshold: bool = False
    alpha_stable: float | None = None
    alpha_safe: float | None = None
    safety: float | None = None
    alpha_fallback: bool = False

    def to_dict(self) -> dict:
        return {
            "alpha_stable": self.alpha_stable,
            "alpha_safe": self.alpha_safe,
            "safety": self.safety,
            "alpha_fallback": self.alpha_fallback,
            "q_max": self.q_max,
            "qs": list(self.qs),
            "tau_max": self.tau_max,
            "tau_candidates": [[int(t), float(r)] for t, r in self.tau_candidates],
            "threshold": self.threshold,
            "below_threshold": self.below_threshold,
        }


def estimate_tail_index(returns, ml_refine: bool = False) -> float:
    """Stability index via McCulloch's quantile ratio, clamped to [0.5, 2].

    Below 500 observations the estimator is unreliable; we warn and fall
    back to a conservative alpha = 1.25. ml_refine runs one coarse pass of
    stable-density maximum likelihood around the quantile estimate (slow,
    off by default).
    """
    x = np.asarray(returns, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("returns must be a non-empty 1-d array")
    if not np.isfinite(x).all():
        raise ValueError("returns contain non-finite values")
    if x.size < 500:
        warnings.warn(
            f"only {x.size} observations, falling back to alpha = {ALPHA_FALLBACK}",
            RuntimeWarning,
        )
        return ALPHA_FALLBACK
    q05, q25, q75, q95 = np.quantile(x, [0.05, 0.25, 0.75, 0.95])
    spread = q75 - q25
    if spread <= 0.0:
        raise ValueError("degenerate quartiles, cannot estimate tail index")
    nu = (q95 - q05) / spread
    alpha = float(np.interp(nu, _NU_TABLE, _ALPHA_TABLE))
    if ml_refine:
        alpha = _ml_refine(x, alpha)
    return float(np.clip(alpha, 0.5, 2.0))


def _ml_refine(x: np.ndarray, alpha0: float) -> float:
    from scipy.stats import levy_stable

    sub = x if x.size <= 2000 else x[:: x.size // 2000][:2000]
    scale = max((np.quantile(sub, 0.75) - np.quantile(sub, 0.25)) / 2.0, 1e-300)
    loc = float(np.median(sub))
    grid = np.clip(alpha0 + np.array([-0.1, -0.05, 0.0, 0.05, 0.1]), 0.5, 2.0)
    ll = [
        np.sum(levy_stable.logpdf(sub, a, 0.0, loc=loc, scale=scale)) for a in np.unique(grid)
    ]
    return float(np.unique(grid)[int(np.argmax(ll))])


def select_q_range(alpha: float, s: float = 0.8, step: float = Q_STEP) -> np.ndarray:
    """The moment grid {step, 2 step, ...} capped at q_max = s * alpha."""
    if not (0.5 <= alpha <= 2.0):
        raise ValueError(f"alpha must lie in [0.5, 2.0], got {alpha}")
    if not (0.0 < s <= 1.0):
        raise ValueError("safety factor must lie in (0, 1]")
    if step <= 0.0:
        raise ValueError("step > 0 required")
    q_max = s * alpha
    count = int(np.floor(q_max / step + 1e-9))
    if count < 5:
        raise ValueError(
            f"q grid too short: q_max = {q_max:.3f} admits only {count} points (need >= 5)"
        )
    return np.round(np.arange(1, count + 1) * step, 12)


def default_tau_candidates(n: int) -> tuple[int, ...]:
    cands = tuple(t for t in TAU_CANDIDATE_POOL if t <= n // 10)
    if not cands:
        raise ValueError(f"path of length {n} is too short to tune (need n >= 50)")
    return cands


def select_tau_max(
    path: PathSeries | np.ndarray,
    qs,
    candidates=None,
    threshold: float = 0.98,
) -> TuningResult:
    """Pick the largest tau_max whose worst per-q R^2 clears the threshold.

    The structure function is computed once at the largest candidate and
    prefix-sliced per candidate, so the sweep costs one pass. If no
    candidate qualifies, the best one is returned with below_threshold set.
    """
    values = path.values if isinstance(path, PathSeries) else np.asarray(path, dtype=np.float64)
    n = values.size
    if candidates is None:
        candidates = default_tau_candidates(n)
    candidates = sorted(int(c) for c in candidates)
    if not candidates:
        raise ValueError("no tau candidates supplied")
    if candidates[0] < 5:
        raise ValueError("tau candidates must be >= 5")
    if candidates[-1] > n // 10:
        raise ValueError(f"tau candidate {candidates[-1]} exceeds length/10 = {n // 10}")
    if not (0.0 <= threshold < 1.0):
        raise ValueError("threshold must lie in [0, 1)")
    qs = np.asarray(qs, dtype=np.float64)
    taus_full = np.arange(1, candidates[-1] + 1)
    grid_full = structure_function(values, taus_full, qs)
    pairs: list[tuple[int, float]] = []
    for c in candidates:
        sub = normalize_standardize(
            MomentGrid(taus=grid_full.taus[:c], qs=grid_full.qs, xi=grid_full.xi[:c])
        )
        r2_min = float(fit_hq(sub).r2.min())
        pairs.append((c, r2_min))
    qualifying = [c for c, r in pairs if r >= threshold]
    if qualifying:
        tau_max = qualifying[-1]
        below = False
    else:
        tau_max = max(pairs, key=lambda cr: cr[1])[0]
        below = True
    return TuningResult(
        q_max=float(qs.max()),
        qs=tuple(float(q) for q in qs),
        tau_max=tau_max,
        tau_candidates=tuple(pairs),
        threshold=threshold,
        below_threshold=below,
    )


def tune(
    path: PathSeries,
    s: float = 0.8,
    threshold: float = 0.98,
    candidates=None,
    q_step: float = Q_STEP,
    ml_refine: bool = False,
) -> TuningResult:
    """Full tuning pass on one series: tail index -> q grid -> tau range."""
    inc = path.increments
    fallback = inc.size < 500
    alpha = estimate_tail_index(inc, ml_refine=ml_refine)
    qs = select_q_range(alpha, s, step=q_step)
    result = select_tau_max(path, qs, candidates=candidates, threshold=threshold)
    return replace(
        result,
        alpha_stable=alpha,
        alpha_safe=s * alpha,
        safety=s,
        alpha_fallback=fallback,
    )
