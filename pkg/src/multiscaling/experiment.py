"""Monte Carlo experiment harness: parameter grids x simulations x two-stage
tests, with JSON-lines crash safety, deterministic aggregation, and CSV
emitters for the tables and figure data.

Per-simulation seeds are derived from (base_seed, grid_index, sim_index)
through a splitmix64-style mixer, so any grid point can be rerun in
isolation and results never depend on worker scheduling.
"""

from __future__ import annotations

import dataclasses
import json
import os
import sys
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .descriptives import compute_diagnostics
from .processes import (
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
from .rng import RngSpec
from .tuning import Q_STEP
from .twostage import TestConfig, run_two_stage

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

#: named H grids; the source tables and the introductory figure use
#: different ranges, so both ship as presets instead of guessing one.
GRID_PRESETS: dict[str, tuple[dict[str, float], ...]] = {
    "tables": tuple({"hurst": h} for h in (0.001, 0.005, 0.01, 0.05, 0.1, 0.2)),
    "figure1": tuple({"hurst": h} for h in (0.05, 0.1, 0.2, 0.3)),
}

FIGURE1_HURSTS = (0.05, 0.1, 0.2)


def splitmix64(*parts: int) -> int:
    """Fold integer parts into one 64-bit seed, one finalizer pass each."""
    x = 0
    for part in parts:
        x = (x + _GOLDEN + (part & _MASK)) & _MASK
        x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
        x ^= x >> 31
    return x


def derive_seed(base_seed: int, grid_index: int, sim_index: int) -> int:
    return splitmix64(base_seed, grid_index, sim_index)


@dataclass(frozen=True)
class ExperimentConfig:
    process: str
    grid: tuple[Mapping[str, float], ...]
    out_dir: str
    n_sims: int = 1000
    path_length: int = 10_000
    i_count: int = 1000
    j_count: int = 1000
    alpha_level: float = 0.05
    safety: float = 0.8
    threshold: float = 0.98
    q_step: float = Q_STEP
    tau_candidates: tuple[int, ...] | None = None
    process_params: Mapping[str, float] = field(default_factory=dict)
    base_seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.process not in ("fbm", "rbergomi", "mrw", "flsm"):
            raise ValueError(f"unknown process kind {self.process!r}")
        if not self.grid:
            raise ValueError("parameter grid must be non-empty")
        if min(self.n_sims, self.path_length, self.i_count, self.j_count, self.workers) < 1:
            raise ValueError("all counts must be >= 1")
        object.__setattr__(self, "grid", tuple(dict(g) for g in self.grid))
        object.__setattr__(self, "process_params", dict(self.process_params))

    def grid_label(self, grid_index: int) -> str:
        point = self.grid[grid_index]
        return ",".join(f"{k}={point[k]:g}" for k in sorted(point))

    def test_config(self) -> TestConfig:
        return TestConfig(
            i_count=self.i_count,
            j_count=self.j_count,
            alpha_level=self.alpha_level,
            safety=self.safety,
            threshold=self.threshold,
            q_step=self.q_step,
            tau_candidates=self.tau_candidates,
        )

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["grid"] = [dict(g) for g in self.grid]
        d["process_params"] = dict(self.process_params)
        return d


def load_config(path: str, **overrides: Any) -> ExperimentConfig:
    """Build an ExperimentConfig from a TOML file.

    Sections: [experiment] scalar settings, [tuning] hyperparameter
    settings, [process_params] fixed simulator parameters, and either
    repeated [[grid]] tables or experiment.grid_preset naming an entry of
    GRID_PRESETS. Keyword overrides win over file values.
    """
    try:
        import tomllib  # py >= 3.11
    except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
        import tomli as tomllib

    with open(path, "rb") as fh:
        raw = tomllib.load(fh)

    exp = dict(raw.get("experiment", {}))
    tuning = raw.get("tuning", {})
    kwargs: dict[str, Any] = {}

    preset = exp.pop("grid_preset", None)
    if "grid" in raw:
        kwargs["grid"] = tuple(raw["grid"])
    elif preset is not None:
        if preset not in GRID_PRESETS:
            raise ValueError(f"unknown grid preset {preset!r}; have {sorted(GRID_PRESETS)}")
        kwargs["grid"] = GRID_PRESETS[preset]

    for key in ("process", "out_dir", "n_sims", "path_length", "i_count",
                "j_count", "alpha_level", "base_seed", "workers"):
        if key in exp:
            kwargs[key] = exp[key]
    for key in ("safety", "threshold", "q_step"):
        if key in tuning:
            kwargs[key] = tuning[key]
    if "tau_candidates" in tuning:
        kwargs["tau_candidates"] = tuple(int(t) for t in tuning["tau_candidates"])
    if "process_params" in raw:
        kwargs["process_params"] = dict(raw["process_params"])

    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


def _simulate(config: ExperimentConfig, grid_index: int, rng: RngSpec) -> PathSeries:
    params: dict[str, Any] = dict(config.process_params)
    params.update(config.grid[grid_index])
    n = config.path_length
    if config.process == "fbm":
        return simulate_fbm(FbmParams(n=n, **params), rng)
    if config.process == "rbergomi":
        path, _ = simulate_rbergomi(RBergomiParams(n=n, **params), rng)
        return path
    if config.process == "mrw":
        return simulate_mrw(MrwParams(n=n, **params), rng)
    return simulate_flsm(FlsmParams(n=n, **params), rng)


def run_single(config: ExperimentConfig, grid_index: int, sim_index: int) -> dict[str, Any]:
    """One (grid point, simulation) job. Pure given its derived seed."""
    seed = derive_seed(config.base_seed, grid_index, sim_index)
    record: dict[str, Any] = {
        "grid_index": grid_index,
        "grid": config.grid_label(grid_index),
        "sim_index": sim_index,
        "seed": seed,
    }
    try:
        path = _simulate(config, grid_index, RngSpec(seed))
        diag = compute_diagnostics(path.increments)
        verdict = run_two_stage(path, config.test_config(), RngSpec(seed, 1))
    except Exception as exc:  # noqa: BLE001 - failures become records
        record["status"] = "failed"
        record["error"] = f"{type(exc).__name__}: {exc}"
        return record
    record["status"] = "ok"
    record["classification"] = verdict.classification
    record["b"] = verdict.b_original
    record["p_presence"] = verdict.stage1.p
    record["i_effective"] = verdict.stage1.count
    if verdict.stage2 is not None:
        record["p_source"] = verdict.stage2.p
        record["b_median_shuffled"] = verdict.stage2.b_median
        record["j_effective"] = verdict.stage2.count
    else:
        record["p_source"] = None
        record["b_median_shuffled"] = None
        record["j_effective"] = None
    record["h1"] = verdict.h1
    record["tau_max"] = verdict.tuning.tau_max if verdict.tuning else None
    record["alpha_stable"] = verdict.tuning.alpha_stable if verdict.tuning else None
    record["below_threshold"] = verdict.tuning.below_threshold if verdict.tuning else None
    record["kurtosis"] = diag.kurtosis
    record["vol_clustering"] = diag.vol_clustering
    return record


# ---------------------------------------------------------------------------
# record store (JSON lines, append-only, resumable)
# ---------------------------------------------------------------------------


def _records_path(out_dir: str) -> str:
    return os.path.join(out_dir, "records.jsonl")


def read_records(out_dir: str) -> list[dict[str, Any]]:
    """All intact records; a torn trailing line (crash mid-write) is dropped."""
    path = _records_path(out_dir)
    if not os.path.exists(path):
        return []
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                break  # torn tail; everything before it is intact
    return records


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _dump(record: Mapping[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, allow_nan=True)


class _FailureTracker:
    """Abort a run as soon as any grid point exceeds the failure budget."""

    def __init__(self, config: ExperimentConfig) -> None:
        self.limit = 0.05 * config.n_sims
        self.counts = [0] * len(config.grid)
        self.config = config

    def add(self, record: Mapping[str, Any]) -> None:
        if record.get("status") == "ok":
            return
        g = record["grid_index"]
        self.counts[g] += 1
        if self.counts[g] > self.limit:
            label = self.config.grid_label(g)
            raise RuntimeError(
                f"grid point {label}: {self.counts[g]} of {self.config.n_sims} "
                f"simulations failed (>5%); last error: {record.get('error')}"
            )


def run_experiment(config: ExperimentConfig) -> "ExperimentReport":
    """Run all (grid point, simulation) jobs, then aggregate.

    Completed records found in the output directory are skipped, so a
    crashed or interrupted run resumes where it stopped. records.jsonl
    is flushed per simulation; its line order depends on scheduling, but
    aggregation sorts by (grid_index, sim_index) so report.csv is
    bit-identical for any worker count.
    """
    os.makedirs(config.out_dir, exist_ok=True)
    _atomic_write(
        os.path.join(config.out_dir, "run_meta.json"),
        json.dumps({"config": config.to_dict()}, sort_keys=True, indent=1) + "\n",
    )

    existing = read_records(config.out_dir)
    done = {(r["grid_index"], r["sim_index"]) for r in existing}
    tracker = _FailureTracker(config)
    for rec in existing:
        tracker.add(rec)

    jobs = [
        (g, k)
        for g in range(len(config.grid))
        for k in range(config.n_sims)
        if (g, k) not in done
    ]

    rec_path = _records_path(config.out_dir)
    if existing:
        # rewrite intact records only, in case the tail line was torn
        _atomic_write(rec_path, "".join(_dump(r) + "\n" for r in existing))

    with open(rec_path, "a", encoding="utf-8") as sink:

        def emit(record: dict[str, Any]) -> None:
            sink.write(_dump(record) + "\n")
            sink.flush()
            tracker.add(record)

        if config.workers == 1:
            for g, k in jobs:
                emit(run_single(config, g, k))
        else:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                pending = {pool.submit(run_single, config, g, k) for g, k in jobs}
                try:
                    while pending:
                        finished, pending = wait(pending, return_when=FIRST_COMPLETED)
                        for fut in finished:
                            emit(fut.result())
                except Exception:
                    for fut in pending:
                        fut.cancel()
                    raise

    return aggregate(config, read_records(config.out_dir))


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridPointSummary:
    grid: str
    n_requested: int
    n_ok: int
    n_failed: int
    sig_pct: float
    distributional_pct: float
    temporal_pct: float
    mean_b: float
    sd_b: float
    kurtosis_quartiles: tuple[float, float, float]
    vol_clustering_quartiles: tuple[float, float, float]


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    rows: tuple[GridPointSummary, ...]
    records: tuple[Mapping[str, Any], ...]


def aggregate(config: ExperimentConfig, records: Sequence[Mapping[str, Any]]) -> ExperimentReport:
    rows = []
    by_grid: dict[int, list[Mapping[str, Any]]] = {g: [] for g in range(len(config.grid))}
    for rec in records:
        by_grid.setdefault(rec["grid_index"], []).append(rec)

    for g in range(len(config.grid)):
        recs = sorted(by_grid[g], key=lambda r: r["sim_index"])
        ok = [r for r in recs if r["status"] == "ok"]
        n_failed = len(recs) - len(ok)
        if n_failed > 0.05 * config.n_sims:
            raise RuntimeError(
                f"grid point {config.grid_label(g)}: {n_failed} failures exceed the 5% budget"
            )
        if not ok:
            raise RuntimeError(f"grid point {config.grid_label(g)}: no successful simulations")
        cls = [r["classification"] for r in ok]
        n_rej = sum(c != "not_multiscaling" for c in cls)
        n_dist = sum(c == "distributional" for c in cls)
        n_temp = sum(c in ("temporal_enhancing", "temporal_reducing") for c in cls)
        b = np.array([r["b"] for r in ok], dtype=np.float64)
        kurt = np.array([r["kurtosis"] for r in ok], dtype=np.float64)
        clust = np.array([r["vol_clustering"] for r in ok], dtype=np.float64)
        rows.append(
            GridPointSummary(
                grid=config.grid_label(g),
                n_requested=config.n_sims,
                n_ok=len(ok),
                n_failed=n_failed,
                sig_pct=100.0 * n_rej / len(ok),
                distributional_pct=100.0 * n_dist / n_rej if n_rej else 0.0,
                temporal_pct=100.0 * n_temp / n_rej if n_rej else 0.0,
                mean_b=float(b.mean()),
                sd_b=float(b.std(ddof=1)) if b.size > 1 else 0.0,
                kurtosis_quartiles=tuple(float(x) for x in np.quantile(kurt, (0.25, 0.5, 0.75))),
                vol_clustering_quartiles=tuple(float(x) for x in np.quantile(clust, (0.25, 0.5, 0.75))),
            )
        )
    return ExperimentReport(config=config, rows=tuple(rows), records=tuple(records))


_REPORT_COLUMNS = (
    "grid", "n_requested", "n_ok", "n_failed", "sig_pct", "distributional_pct",
    "temporal_pct", "mean_b", "sd_b", "kurt_q25", "kurt_med", "kurt_q75",
    "clust_q25", "clust_med", "clust_q75",
)


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)  # shortest round-trip decimal
    return str(value)


def write_report_csv(report: ExperimentReport, path: str | None = None) -> str:
    path = path or os.path.join(report.config.out_dir, "report.csv")
    lines = [",".join(_REPORT_COLUMNS)]
    for row in report.rows:
        kq, cq = row.kurtosis_quartiles, row.vol_clustering_quartiles
        cells = (
            row.grid, row.n_requested, row.n_ok, row.n_failed, row.sig_pct,
            row.distributional_pct, row.temporal_pct, row.mean_b, row.sd_b,
            kq[0], kq[1], kq[2], cq[0], cq[1], cq[2],
        )
        lines.append(",".join(_fmt(c) for c in cells))
    _atomic_write(path, "\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------------------
# table and figure emitters
# ---------------------------------------------------------------------------

_TABLE_HEADER = ("Sig (%)", "Distributional (%)", "Temporal (%)", "Mean B", "SD(B)")


def _grid_column_name(report: ExperimentReport) -> str:
    first = report.config.grid[0]
    return next(iter(sorted(first))) if len(first) == 1 else "grid"


def _table_rows(report: ExperimentReport) -> list[tuple[str, ...]]:
    rows = []
    single = len(report.config.grid[0]) == 1 and all(len(g) == 1 for g in report.config.grid)
    for g, row in enumerate(report.rows):
        point = report.config.grid[g]
        label = f"{point[next(iter(sorted(point)))]:g}" if single else row.grid
        rows.append(
            (
                label,
                f"{row.sig_pct:.1f}",
                f"{row.distributional_pct:.1f}",
                f"{row.temporal_pct:.1f}",
                f"{row.mean_b:.4f}",
                f"{row.sd_b:.4f}",
            )
        )
    return rows


def emit_tables(report: ExperimentReport, out_dir: str | None = None) -> list[str]:
    """Write the attribution table as CSV and aligned text."""
    if not report.rows:
        raise ValueError("empty report")
    out_dir = out_dir or os.path.join(report.config.out_dir, "tables")
    os.makedirs(out_dir, exist_ok=True)
    name = report.config.process
    header = (_grid_column_name(report),) + _TABLE_HEADER
    rows = _table_rows(report)

    csv_path = os.path.join(out_dir, f"{name}.csv")
    _atomic_write(csv_path, "\n".join(",".join(r) for r in [header, *rows]) + "\n")

    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    text = "\n".join(
        "  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in [header, *rows]
    )
    txt_path = os.path.join(out_dir, f"{name}.txt")
    _atomic_write(txt_path, text + "\n")
    return [csv_path, txt_path]


def emit_figure_data(report: ExperimentReport, out_dir: str | None = None) -> list[str]:
    """Long-format per-simulation statistics behind the boxplot figures."""
    if not report.rows:
        raise ValueError("empty report")
    out_dir = out_dir or os.path.join(report.config.out_dir, "figures")
    os.makedirs(out_dir, exist_ok=True)
    label = {r["grid_index"]: r["grid"] for r in report.records}
    written = []
    for stat, key in (("B", "b"), ("kurtosis", "kurtosis"), ("vol_clustering", "vol_clustering")):
        lines = ["grid,statistic,value"]
        ordered = sorted(
            (r for r in report.records if r["status"] == "ok"),
            key=lambda r: (r["grid_index"], r["sim_index"]),
        )
        for rec in ordered:
            lines.append(f"{label[rec['grid_index']]},{stat},{_fmt(float(rec[key]))}")
        path = os.path.join(out_dir, f"{stat.lower()}.csv")
        _atomic_write(path, "\n".join(lines) + "\n")
        written.append(path)
    return written


def emit_figure1_paths(
    out_dir: str,
    hursts: Iterable[float] = FIGURE1_HURSTS,
    n: int = 10_000,
    base_seed: int = 0,
    process_params: Mapping[str, float] | None = None,
) -> str:
    """Price, return, and spot-volatility traces for representative H values.

    One simulated path per H; price is the exponential of the simulated
    log-price. Long format: hurst, statistic, index, value.
    """
    os.makedirs(out_dir, exist_ok=True)
    lines = ["hurst,statistic,index,value"]
    for g, h in enumerate(hursts):
        params = RBergomiParams(hurst=h, n=n, **dict(process_params or {}))
        path, variance = simulate_rbergomi(params, RngSpec(derive_seed(base_seed, g, 0)))
        price = np.exp(path.values)
        returns = np.diff(path.values)
        vol = np.sqrt(variance)
        for stat, arr in (("price", price), ("returns", returns), ("volatility", vol)):
            for i, v in enumerate(arr):
                lines.append(f"{h:g},{stat},{i},{_fmt(float(v))}")
    path_out = os.path.join(out_dir, "figure1.csv")
    _atomic_write(path_out, "\n".join(lines) + "\n")
    return path_out
