"""Command-line interface.

Subcommands: simulate (write a path), analyze (GHE + tuning on a series
file), test (two-stage verdict on a series file), experiment (full Monte
Carlo run from a TOML config), tables and figures (re-emit outputs from a
completed run directory). Series files are single-column CSVs of levels,
header optional. Errors print one machine-readable line on stderr and
exit nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from typing import Any, Sequence

import numpy as np

from . import experiment as xp
from .ghe import estimate_ghe
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
from .tuning import Q_STEP, tune
from .twostage import TestConfig, run_two_stage


def _read_series(path: str) -> np.ndarray:
    values = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            cell = line.strip().split(",")[0]
            if not cell:
                continue
            try:
                values.append(float(cell))
            except ValueError:
                if i == 0:
                    continue  # header row
                raise ValueError(f"{path}: non-numeric value on line {i + 1}: {cell!r}")
    if len(values) < 2:
        raise ValueError(f"{path}: need at least 2 values, found {len(values)}")
    return np.asarray(values, dtype=np.float64)


def _write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _emit(payload: dict[str, Any], out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        _write_text(out, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_simulate(args: argparse.Namespace) -> int:
    rng = RngSpec(args.seed)
    kind = args.process
    if kind == "fbm":
        path = simulate_fbm(FbmParams(hurst=args.hurst, n=args.n, scale=args.scale), rng)
    elif kind == "rbergomi":
        params = RBergomiParams(
            hurst=args.hurst, n=args.n, xi0=args.xi0, eta=args.eta, rho=args.rho, dt=args.dt
        )
        path, _ = simulate_rbergomi(params, rng)
    elif kind == "mrw":
        path = simulate_mrw(
            MrwParams(lam=args.lam, n=args.n, large_scale=args.large_scale, sigma=args.sigma), rng
        )
    else:
        path = simulate_flsm(
            FlsmParams(alpha=args.alpha, hurst=args.hurst, n=args.n,
                       kernel_cutoff=args.kernel_cutoff),
            rng,
        )
    text = "\n".join(repr(float(v)) for v in path.values) + "\n"
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _loaded_series(path: str) -> PathSeries:
    values = _read_series(path)
    return PathSeries(values=values, meta={"kind": "file", "source": path})


def _cmd_analyze(args: argparse.Namespace) -> int:
    series = _loaded_series(args.input)
    tuning = tune(
        series,
        s=args.safety,
        threshold=args.threshold,
        q_step=args.q_step,
        ml_refine=args.ml_refine,
    )
    taus = np.arange(1, tuning.tau_max + 1)
    result = estimate_ghe(series.values, taus, np.asarray(tuning.qs))
    _emit({"tuning": tuning.to_dict(), "ghe": result.to_dict()}, args.out)
    return 0


def _cmd_test(args: argparse.Namespace) -> int:
    series = _loaded_series(args.input)
    config = TestConfig(
        i_count=args.i_count,
        j_count=args.j_count,
        alpha_level=args.alpha_level,
        safety=args.safety,
        threshold=args.threshold,
    )
    verdict = run_two_stage(series, config, RngSpec(args.seed))
    _emit(verdict.to_dict(), args.out)
    # one-line human summary; stderr so stdout stays parseable JSON
    p2 = f", p_source={verdict.stage2.p:.4f}" if verdict.stage2 else ""
    print(
        f"verdict: {verdict.classification} "
        f"(B={verdict.b_original:.4f}, p_presence={verdict.stage1.p:.4f}{p2})",
        file=sys.stderr,
    )
    return 0


def _cmd_experiment(args: argparse.Namespace) -> int:
    overrides: dict[str, Any] = {}
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.out is not None:
        overrides["out_dir"] = args.out
    config = xp.load_config(args.config, **overrides)
    report = xp.run_experiment(config)
    csv_path = xp.write_report_csv(report)
    xp.emit_tables(report)
    xp.emit_figure_data(report)
    sys.stdout.write(csv_path + "\n")
    return 0


def _load_report(out_dir: str) -> xp.ExperimentReport:
    meta_path = os.path.join(out_dir, "run_meta.json")
    if not os.path.exists(meta_path):
        raise FileNotFoundError(f"{meta_path} not found; is {out_dir!r} a run directory?")
    with open(meta_path, encoding="utf-8") as fh:
        raw = json.load(fh)["config"]
    raw["out_dir"] = out_dir  # the directory may have been moved since the run
    if raw.get("tau_candidates") is not None:
        raw["tau_candidates"] = tuple(raw["tau_candidates"])
    config = xp.ExperimentConfig(**raw)
    return xp.aggregate(config, xp.read_records(out_dir))


def _cmd_tables(args: argparse.Namespace) -> int:
    report = _load_report(args.out)
    for path in xp.emit_tables(report):
        sys.stdout.write(path + "\n")
    return 0


def _cmd_figures(args: argparse.Namespace) -> int:
    report = _load_report(args.out)
    for path in xp.emit_figure_data(report):
        sys.stdout.write(path + "\n")
    if args.figure1:
        seed = args.seed if args.seed is not None else report.config.base_seed
        path = xp.emit_figure1_paths(
            os.path.join(args.out, "figures"), base_seed=seed
        )
        sys.stdout.write(path + "\n")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multiscaling",
        description="Multiscaling detection and source attribution for stochastic-process paths.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a process path to CSV")
    sim.add_argument("--process", required=True, choices=("fbm", "rbergomi", "mrw", "flsm"))
    sim.add_argument("--n", type=int, required=True, help="path length (number of samples)")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", help="output CSV (default: stdout)")
    sim.add_argument("--hurst", type=float, default=0.5)
    sim.add_argument("--scale", type=float, default=1.0, help="fbm increment scale")
    sim.add_argument("--xi0", type=float, default=0.1)
    sim.add_argument("--eta", type=float, default=1.9)
    sim.add_argument("--rho", type=float, default=-0.9)
    sim.add_argument("--dt", type=float, default=6e-4)
    sim.add_argument("--lam", type=float, default=0.25, help="mrw intermittency")
    sim.add_argument("--sigma", type=float, default=1.0, help="mrw base volatility")
    sim.add_argument("--large-scale", type=int, default=None, help="mrw decorrelation scale")
    sim.add_argument("--alpha", type=float, default=1.9, help="flsm stability index")
    sim.add_argument("--kernel-cutoff", type=int, default=None)
    sim.set_defaults(func=_cmd_simulate)

    ana = sub.add_parser("analyze", help="GHE estimate with data-driven tuning")
    ana.add_argument("--input", required=True, help="single-column CSV of levels")
    ana.add_argument("--out", help="write JSON here instead of stdout")
    ana.add_argument("--q-step", type=float, default=Q_STEP)
    ana.add_argument("--safety", type=float, default=0.8)
    ana.add_argument("--threshold", type=float, default=0.98)
    ana.add_argument("--ml-refine", action="store_true")
    ana.set_defaults(func=_cmd_analyze)

    tst = sub.add_parser("test", help="two-stage multiscaling test")
    tst.add_argument("--input", required=True, help="single-column CSV of levels")
    tst.add_argument("--out", help="write JSON here instead of stdout")
    tst.add_argument("--I", dest="i_count", type=int, default=1000)
    tst.add_argument("--J", dest="j_count", type=int, default=1000)
    tst.add_argument("--alpha-level", type=float, default=0.05)
    tst.add_argument("--safety", type=float, default=0.8)
    tst.add_argument("--threshold", type=float, default=0.98)
    tst.add_argument("--seed", type=int, default=0)
    tst.set_defaults(func=_cmd_test)

    exp = sub.add_parser("experiment", help="run a Monte Carlo experiment from a TOML config")
    exp.add_argument("--config", required=True)
    exp.add_argument("--seed", type=int, default=None, help="override base seed")
    exp.add_argument("--workers", type=int, default=None)
    exp.add_argument("--out", default=None, help="override output directory")
    exp.set_defaults(func=_cmd_experiment)

    tab = sub.add_parser("tables", help="re-emit attribution tables from a run directory")
    tab.add_argument("--out", required=True, help="run directory containing records.jsonl")
    tab.set_defaults(func=_cmd_tables)

    fig = sub.add_parser("figures", help="re-emit figure data from a run directory")
    fig.add_argument("--out", required=True, help="run directory containing records.jsonl")
    fig.add_argument("--figure1", action="store_true", help="also write representative path traces")
    fig.add_argument("--seed", type=int, default=None)
    fig.set_defaults(func=_cmd_figures)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - contract: one error line, nonzero exit
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
