"""Harness contracts: seed derivation, config loading, crash-safe record
store, scheduling-independent aggregation, and the emitters."""

import json
import os

import numpy as np
import pytest

from multiscaling.experiment import (
    GRID_PRESETS,
    ExperimentConfig,
    ExperimentReport,
    aggregate,
    derive_seed,
    emit_figure1_paths,
    emit_figure_data,
    emit_tables,
    load_config,
    read_records,
    run_experiment,
    run_single,
    splitmix64,
    write_report_csv,
)


def mini_config(out_dir: str, **overrides) -> ExperimentConfig:
    kwargs = dict(
        process="fbm",
        grid=({"hurst": 0.3}, {"hurst": 0.5}),
        out_dir=out_dir,
        n_sims=3,
        path_length=1200,
        i_count=100,
        j_count=100,
        base_seed=11,
    )
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


# ---------------------------------------------------------------------------
# seed derivation
# ---------------------------------------------------------------------------


def test_splitmix_is_deterministic_and_order_sensitive():
    assert splitmix64(1, 2, 3) == splitmix64(1, 2, 3)
    assert splitmix64(1, 2) != splitmix64(2, 1)
    assert 0 <= splitmix64(2**64 - 1, 10**9) < 2**64


def test_derived_seeds_are_distinct():
    seeds = {derive_seed(0, g, k) for g in range(10) for k in range(500)}
    assert len(seeds) == 5000
    # rough avalanche check: bits look balanced across the batch
    bits = np.mean([bin(s).count("1") for s in seeds])
    assert 31.0 < bits < 33.0


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


def test_config_validation(tmp_out):
    with pytest.raises(ValueError):
        mini_config(tmp_out, process="ornstein")
    with pytest.raises(ValueError):
        mini_config(tmp_out, grid=())
    with pytest.raises(ValueError):
        mini_config(tmp_out, n_sims=0)
    with pytest.raises(ValueError):
        mini_config(tmp_out, workers=0)


def test_grid_labels_sorted(tmp_out):
    c = mini_config(tmp_out, grid=({"lam": 0.25, "large_scale": 1000},))
    assert c.grid_label(0) == "lam=0.25,large_scale=1000"
    assert mini_config(tmp_out).grid_label(1) == "hurst=0.5"


def test_test_config_passthrough(tmp_out):
    c = mini_config(tmp_out, alpha_level=0.01, tau_candidates=(5, 10))
    tc = c.test_config()
    assert tc.i_count == 100 and tc.alpha_level == 0.01
    assert tc.tau_candidates == (5, 10)


def test_config_round_trips_through_dict(tmp_out):
    c = mini_config(tmp_out)
    d = c.to_dict()
    c2 = ExperimentConfig(**d)
    assert c2.grid == c.grid and c2.base_seed == c.base_seed


def test_load_config_toml(tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text(
        """
[experiment]
process = "fbm"
out_dir = "out"
n_sims = 3
path_length = 1200
i_count = 100
j_count = 100
base_seed = 7
grid_preset = "figure1"

[tuning]
safety = 0.7
threshold = 0.95
tau_candidates = [5, 10, 20]

[process_params]
scale = 2.0
"""
    )
    c = load_config(str(cfg))
    assert c.process == "fbm" and c.base_seed == 7
    assert c.grid == GRID_PRESETS["figure1"]
    assert c.safety == 0.7 and c.threshold == 0.95
    assert c.tau_candidates == (5, 10, 20)
    assert c.process_params == {"scale": 2.0}
    # keyword overrides win over file values
    assert load_config(str(cfg), n_sims=9).n_sims == 9


def test_load_config_explicit_grid_beats_preset(tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text(
        """
[experiment]
process = "mrw"
out_dir = "out"
grid_preset = "tables"

[[grid]]
lam = 0.25

[[grid]]
lam = 0.05
"""
    )
    c = load_config(str(cfg))
    assert c.grid == ({"lam": 0.25}, {"lam": 0.05})


def test_load_config_unknown_preset(tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text(
        '[experiment]\nprocess = "fbm"\nout_dir = "out"\ngrid_preset = "bogus"\n'
    )
    with pytest.raises(ValueError, match="preset"):
        load_config(str(cfg))


# ---------------------------------------------------------------------------
# single jobs
# ---------------------------------------------------------------------------


def test_run_single_ok_record(tmp_out):
    c = mini_config(tmp_out)
    rec = run_single(c, 0, 2)
    assert rec["status"] == "ok"
    assert rec["seed"] == derive_seed(11, 0, 2)
    assert rec["grid"] == "hurst=0.3" and rec["sim_index"] == 2
    for key in ("classification", "b", "p_presence", "h1", "tau_max",
                "alpha_stable", "kurtosis", "vol_clustering", "below_threshold"):
        assert key in rec
    if rec["classification"] == "not_multiscaling":
        assert rec["p_source"] is None and rec["j_effective"] is None


def test_run_single_failure_becomes_record(tmp_out):
    c = mini_config(tmp_out, tau_candidates=(5, 500))  # 500 > n/10, tuning fails
    rec = run_single(c, 0, 0)
    assert rec["status"] == "failed"
    assert "ValueError" in rec["error"]
    assert "classification" not in rec


# ---------------------------------------------------------------------------
# record store
# ---------------------------------------------------------------------------


def test_read_records_drops_torn_tail(tmp_out):
    path = os.path.join(tmp_out, "records.jsonl")
    with open(path, "w") as fh:
        fh.write(json.dumps({"grid_index": 0, "sim_index": 0, "status": "ok"}) + "\n")
        fh.write('{"grid_index": 0, "sim_ind')  # crash mid-write
    recs = read_records(tmp_out)
    assert len(recs) == 1 and recs[0]["sim_index"] == 0
    assert read_records(os.path.join(tmp_out, "missing")) == []


# ---------------------------------------------------------------------------
# full runs
# ---------------------------------------------------------------------------


def test_run_experiment_end_to_end(tmp_out):
    c = mini_config(tmp_out)
    report = run_experiment(c)
    csv_path = write_report_csv(report)

    records = read_records(tmp_out)
    assert len(records) == 6 and all(r["status"] == "ok" for r in records)
    meta = json.load(open(os.path.join(tmp_out, "run_meta.json")))
    assert meta["config"]["base_seed"] == 11

    assert len(report.rows) == 2
    for row in report.rows:
        assert row.n_ok == 3 and row.n_failed == 0
        # percentage accounting: counts must be integers of n_ok
        assert (row.sig_pct * row.n_ok / 100.0) == pytest.approx(
            round(row.sig_pct * row.n_ok / 100.0), abs=1e-9
        )
        if row.sig_pct > 0:
            assert row.distributional_pct + row.temporal_pct == pytest.approx(100.0)
        else:
            assert row.distributional_pct == 0.0 and row.temporal_pct == 0.0
        assert np.isfinite(row.mean_b) and np.isfinite(row.sd_b)

    with open(csv_path) as fh:
        lines = fh.read().splitlines()
    assert len(lines) == 3 and len(lines[0].split(",")) == 15


def test_resume_is_idempotent_and_crash_safe(tmp_out):
    c = mini_config(tmp_out)
    run_experiment(c)
    rec_path = os.path.join(tmp_out, "records.jsonl")
    full = open(rec_path).read()
    report_full = write_report_csv(aggregate(c, read_records(tmp_out)))
    full_csv = open(report_full).read()

    # truncate to simulate a crash after 2 sims, then resume
    lines = full.splitlines(keepends=True)
    with open(rec_path, "w") as fh:
        fh.writelines(lines[:2])
        fh.write('{"torn')  # and a torn tail on top
    run_experiment(c)
    resumed = read_records(tmp_out)
    assert len(resumed) == 6
    assert open(report_full).read() == full_csv  # aggregation order restored

    # complete store: rerun schedules nothing and leaves bytes alone
    before = open(rec_path).read()
    run_experiment(c)
    assert open(rec_path).read() == before


def test_worker_count_does_not_change_results(tmp_out):
    a_dir = os.path.join(tmp_out, "a")
    b_dir = os.path.join(tmp_out, "b")
    ra = run_experiment(mini_config(a_dir, workers=1))
    rb = run_experiment(mini_config(b_dir, workers=2))
    pa = write_report_csv(ra)
    pb = write_report_csv(rb)
    assert open(pa).read() == open(pb).read()


def test_failure_budget_aborts_run(tmp_out):
    c = mini_config(tmp_out, tau_candidates=(5, 500))
    with pytest.raises(RuntimeError, match="5%"):
        run_experiment(c)


# ---------------------------------------------------------------------------
# aggregation as a pure function
# ---------------------------------------------------------------------------


def _ok(g, k, cls, b, kurt, clust):
    return {
        "grid_index": g, "sim_index": k, "status": "ok", "classification": cls,
        "b": b, "kurtosis": kurt, "vol_clustering": clust,
    }


def test_aggregate_counts_and_moments(tmp_out):
    c = mini_config(tmp_out, grid=({"hurst": 0.3},), n_sims=4)
    recs = [
        _ok(0, 0, "not_multiscaling", 0.0, 3.0, 0.0),
        _ok(0, 1, "distributional", -0.1, 4.0, 1.0),
        _ok(0, 2, "temporal_enhancing", -0.2, 5.0, 2.0),
        _ok(0, 3, "temporal_reducing", -0.3, 6.0, 3.0),
    ]
    row = aggregate(c, recs).rows[0]
    assert row.n_ok == 4 and row.sig_pct == 75.0
    assert row.distributional_pct == pytest.approx(100.0 / 3)
    assert row.temporal_pct == pytest.approx(200.0 / 3)
    b = np.array([0.0, -0.1, -0.2, -0.3])
    assert row.mean_b == pytest.approx(b.mean())
    assert row.sd_b == pytest.approx(b.std(ddof=1))
    assert row.kurtosis_quartiles == tuple(np.quantile([3.0, 4.0, 5.0, 6.0], (0.25, 0.5, 0.75)))


def test_aggregate_rejects_excess_failures(tmp_out):
    c = mini_config(tmp_out, grid=({"hurst": 0.3},), n_sims=4)
    recs = [
        _ok(0, 0, "not_multiscaling", 0.0, 3.0, 0.0),
        {"grid_index": 0, "sim_index": 1, "status": "failed", "error": "boom"},
    ]
    with pytest.raises(RuntimeError, match="5%"):
        aggregate(c, recs)


def test_aggregate_rejects_empty_grid_point(tmp_out):
    c = mini_config(tmp_out, grid=({"hurst": 0.3},), n_sims=4)
    with pytest.raises(RuntimeError, match="no successful"):
        aggregate(c, [])


# ---------------------------------------------------------------------------
# emitters
# ---------------------------------------------------------------------------


def test_emit_tables_and_figures(tmp_out):
    c = mini_config(tmp_out, grid=({"hurst": 0.3},), n_sims=4)
    recs = [
        _ok(0, k, cls, b, kurt, clust)
        for k, (cls, b, kurt, clust) in enumerate(
            [
                ("not_multiscaling", 0.0, 3.0, 0.0),
                ("distributional", -0.1, 4.0, 1.0),
                ("temporal_enhancing", -0.2, 5.0, 2.0),
                ("temporal_reducing", -0.3, 6.0, 3.0),
            ]
        )
    ]
    for r in recs:
        r["grid"] = "hurst=0.3"
    report = aggregate(c, recs)

    csv_path, txt_path = emit_tables(report)
    csv_lines = open(csv_path).read().splitlines()
    assert csv_lines[0] == "hurst,Sig (%),Distributional (%),Temporal (%),Mean B,SD(B)"
    assert csv_lines[1].startswith("0.3,75.0,33.3,66.7,")
    txt_lines = open(txt_path).read().splitlines()
    assert len({len(l) for l in txt_lines}) == 1  # right-justified columns align

    fig_paths = emit_figure_data(report)
    assert [os.path.basename(p) for p in fig_paths] == ["b.csv", "kurtosis.csv", "vol_clustering.csv"]
    b_lines = open(fig_paths[0]).read().splitlines()
    assert b_lines[0] == "grid,statistic,value"
    assert len(b_lines) == 5
    assert b_lines[1] == "hurst=0.3,B,0.0"

    empty = ExperimentReport(config=c, rows=(), records=())
    with pytest.raises(ValueError):
        emit_tables(empty)
    with pytest.raises(ValueError):
        emit_figure_data(empty)


def test_figure1_traces_deterministic(tmp_out):
    p1 = emit_figure1_paths(os.path.join(tmp_out, "f1"), hursts=(0.1, 0.2), n=64)
    p2 = emit_figure1_paths(os.path.join(tmp_out, "f2"), hursts=(0.1, 0.2), n=64)
    a = open(p1).read()
    assert a == open(p2).read()
    lines = a.splitlines()
    assert lines[0] == "hurst,statistic,index,value"
    assert len(lines) == 1 + 2 * (64 + 63 + 64)
    prices = [float(l.split(",")[3]) for l in lines[1:] if l.split(",")[1] == "price"]
    assert all(p > 0 for p in prices)
