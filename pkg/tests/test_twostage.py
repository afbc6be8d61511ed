"""Two-stage test: permutation p-value arithmetic by hand, rank calibration
under the null, drop-floor plumbing, and deterministic end-to-end verdicts."""

import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from multiscaling.processes import (
    FbmParams,
    FlsmParams,
    MrwParams,
    PathSeries,
    RBergomiParams,
    simulate_fbm,
    simulate_flsm,
    simulate_mrw,
    simulate_rbergomi,
)
from multiscaling.rng import RngSpec
from multiscaling.surrogates import SurrogateBatch
from multiscaling.twostage import (
    CLASS_DISTRIBUTIONAL,
    CLASS_NOT_MULTISCALING,
    CLASS_TEMPORAL_ENHANCING,
    CLASS_TEMPORAL_REDUCING,
    TestConfig,
    _surrogate_b_values,
    run_two_stage,
    stage1_presence,
    stage2_source,
)
from multiscaling.tuning import tune

from conftest import brownian_series

MINI = TestConfig(i_count=100, j_count=100)


# ---------------------------------------------------------------------------
# stage 1
# ---------------------------------------------------------------------------


def test_stage1_all_surrogates_above():
    b_fbm = np.linspace(-0.02, 0.05, 1000)
    s = stage1_presence(-0.08, b_fbm)
    assert s.p == 0.0 and s.reject and s.count == 1000


def test_stage1_original_at_maximum():
    b_fbm = np.linspace(-0.1, 0.1, 201)
    s = stage1_presence(0.1, b_fbm)
    assert s.p == 1.0 and not s.reject


def test_stage1_original_at_median():
    b_fbm = np.linspace(-1.0, 1.0, 101)
    s = stage1_presence(0.0, b_fbm)
    assert s.p == 51 / 101


def test_stage1_rejection_is_strict():
    # exactly 5 of 100 at or below: p = 0.05 is NOT a rejection at alpha 0.05
    b_fbm = np.concatenate([np.full(5, -1.0), np.full(95, 1.0)])
    assert not stage1_presence(-0.5, b_fbm).reject
    b_fbm = np.concatenate([np.full(4, -1.0), np.full(96, 1.0)])
    assert stage1_presence(-0.5, b_fbm).reject


def test_stage1_standardized_diagnostic():
    s = stage1_presence(0.0, np.array([1.0, 1.0, 1.0]))
    assert s.t_standardized is None  # zero spread
    t = stage1_presence(-1.0, np.array([0.0, 2.0])).t_standardized
    assert t == -2.0  # (-1 - 1)/1


def test_stage1_rejects_bad_input():
    with pytest.raises(ValueError):
        stage1_presence(0.0, [])
    with pytest.raises(ValueError):
        stage1_presence(np.nan, [0.0, 1.0])
    with pytest.raises(ValueError):
        stage1_presence(0.0, [0.0, np.inf])


def test_stage1_rank_calibration():
    # b_original exchangeable with the surrogates: p lands uniformly;
    # chi-square over 10 p-bins, 2000 replications, 1% level
    g = np.random.default_rng(7)
    cells = np.zeros(10)
    for _ in range(2000):
        b = g.standard_normal(101)
        p = stage1_presence(b[0], b[1:]).p
        cells[min(int(p * 10), 9)] += 1
    chi2 = float(((cells - 200.0) ** 2 / 200.0).sum())
    assert chi2 < 21.67  # df = 9


# ---------------------------------------------------------------------------
# stage 2
# ---------------------------------------------------------------------------


def test_stage2_hand_enumeration():
    b_shuf = [-0.01, -0.02, -0.03, -0.04, -0.05]  # median -0.03
    s = stage2_source(-0.055, b_shuf)
    assert s.b_median == -0.03
    assert s.d_orig == pytest.approx(0.025)
    assert s.p == 0.0 and s.reject
    assert s.direction == "enhancing"


def test_stage2_centre_case():
    s = stage2_source(-0.03, [-0.01, -0.02, -0.03, -0.04, -0.05])
    assert s.d_orig == 0.0 and s.p == 1.0 and not s.reject


def test_stage2_direction_reducing():
    s = stage2_source(0.5, [-0.01, -0.02, -0.03, -0.04, -0.05])
    assert s.direction == "reducing" and s.p == 0.0


@given(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2), st.integers(0, 2**32 - 1))
def test_stage2_monotone_in_distance(b1, b2, seed):
    b_shuf = np.random.default_rng(seed).normal(0.0, 0.05, 100)
    med = np.median(b_shuf)
    near, far = sorted([b1, b2], key=lambda b: abs(b - med))
    assert stage2_source(near, b_shuf).p >= stage2_source(far, b_shuf).p


# ---------------------------------------------------------------------------
# drop floor
# ---------------------------------------------------------------------------


def _mixed_batch(n_good: int, n_bad: int) -> SurrogateBatch:
    good = [brownian_series(100 + i, 12) for i in range(n_good)]
    # alternating path: at tau = 2 every increment is zero -> degenerate
    bad = [
        PathSeries(values=np.tile([0.0, 1.0], 6), meta={"kind": "bad"})
        for _ in range(n_bad)
    ]
    return SurrogateBatch(
        kind="shuffled", series=tuple(good + bad), source_meta={}, rng=RngSpec(0)
    )


def test_single_degenerate_surrogate_is_dropped():
    taus = np.array([1, 2, 3])
    qs = np.array([0.5, 1.0])
    bs, dropped = _surrogate_b_values(_mixed_batch(10, 1), taus, qs)
    assert bs.size == 10 and dropped == 1


def test_drop_floor_violation_is_hard_error():
    taus = np.array([1, 2, 3])
    qs = np.array([0.5, 1.0])
    with pytest.raises(RuntimeError, match="below the 90% floor"):
        _surrogate_b_values(_mixed_batch(8, 2), taus, qs)


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(i_count=99),
        dict(j_count=99),
        dict(alpha_level=0.0),
        dict(alpha_level=1.0),
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        TestConfig(**kwargs)


def test_config_serialisation():
    c = TestConfig(i_count=200, j_count=300, tau_candidates=(5, 10))
    d = c.to_dict()
    assert d["i_count"] == 200 and d["tau_candidates"] == [5, 10]
    assert TestConfig().to_dict()["tau_candidates"] is None


# ---------------------------------------------------------------------------
# end to end verdicts
# ---------------------------------------------------------------------------


def _coherent(v) -> None:
    """Invariants every verdict must satisfy."""
    assert 0.0 <= v.stage1.p <= 1.0
    assert (v.classification == CLASS_NOT_MULTISCALING) == (not v.stage1.reject)
    if v.stage1.reject:
        assert v.stage2 is not None
        assert 0.0 <= v.stage2.p <= 1.0
        if v.classification == CLASS_TEMPORAL_ENHANCING:
            assert v.b_original < v.stage2.b_median
        elif v.classification == CLASS_TEMPORAL_REDUCING:
            assert v.b_original > v.stage2.b_median
        else:
            assert v.classification == CLASS_DISTRIBUTIONAL
            assert not v.stage2.reject
    else:
        assert v.stage2 is None
    json.dumps(v.to_dict())  # must be serialisable as-is


def test_fbm_input_accepts_the_null():
    # the stage-1 p-value is uniform under the null, so any single seed can
    # land a rejection; over 10 paths at alpha = 0.05 at most a couple should
    accepts = 0
    for k in range(10):
        path = simulate_fbm(FbmParams(hurst=0.3, n=2048), RngSpec(98, k))
        v = run_two_stage(path, MINI, RngSpec(98, 100 + k))
        _coherent(v)
        accepts += v.classification == CLASS_NOT_MULTISCALING
        if k == 0:
            assert v.h1 is not None and 0.2 < v.h1 < 0.4
    assert accepts >= 7


def test_rbergomi_input_rejects_stage1():
    path, _ = simulate_rbergomi(RBergomiParams(hurst=0.01, n=2048), RngSpec(98, 2))
    v = run_two_stage(path, MINI, RngSpec(98, 102))
    _coherent(v)
    assert v.stage1.reject and v.b_original < 0
    assert v.tuning is not None and v.tuning.tau_max >= 5


def test_mrw_input_rejects_stage1():
    path = simulate_mrw(MrwParams(lam=0.5, n=2048), RngSpec(98, 3))
    v = run_two_stage(path, MINI, RngSpec(98, 103))
    _coherent(v)
    assert v.stage1.reject


def test_flsm_heavy_tail_input():
    path = simulate_flsm(FlsmParams(alpha=1.2, hurst=1 / 1.2, n=2048), RngSpec(98, 4))
    v = run_two_stage(path, MINI, RngSpec(98, 104))
    _coherent(v)
    assert v.stage1.reject
    # heavy tails push the tuned q grid below 1; H(1) is still reported
    assert v.tuning.q_max <= 1.0 and v.h1 is not None


def test_verdict_is_deterministic():
    path = simulate_mrw(MrwParams(lam=0.5, n=2048), RngSpec(98, 3))
    a = run_two_stage(path, MINI, RngSpec(98, 103))
    b = run_two_stage(path, MINI, RngSpec(98, 103))
    assert a.to_dict() == b.to_dict()


def test_injected_tuning_is_reused():
    path = simulate_fbm(FbmParams(hurst=0.3, n=2048), RngSpec(98, 0))
    t = tune(path)
    v = run_two_stage(path, MINI, RngSpec(98, 100), tuning=t)
    assert v.tuning is t


def test_short_series_warns():
    path = simulate_fbm(FbmParams(hurst=0.5, n=800), RngSpec(1))
    with pytest.warns(RuntimeWarning):
        run_two_stage(path, MINI, RngSpec(2))
