"""FLSM (alpha, H) grid: heavy tails plus linear memory, no true multiscaling.

Run at N=2048 by default: with non-overlapping moment blocks the stage-1
power against pure tail effects grows with path length, and the desk-scale
reference rates are calibrated at this N (see the rejection-vs-N note in
the test suite).
"""

import argparse

from multiscaling import ExperimentConfig, emit_tables, run_experiment, write_report_csv

GRID = tuple(
    {"alpha": a, "hurst": h}
    for a in (1.5, 1.9)
    for h in (0.1, 0.5, 0.9)
)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/flsm_grid")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--full", action="store_true")
    args = ap.parse_args()

    scale = dict(n_sims=1000, path_length=10_000, i_count=1000, j_count=1000) if args.full \
        else dict(n_sims=100, path_length=2048, i_count=200, j_count=200)
    config = ExperimentConfig(
        process="flsm",
        grid=GRID,
        out_dir=args.out,
        base_seed=args.seed,
        workers=args.workers,
        **scale,
    )
    report = run_experiment(config)
    print(write_report_csv(report))
    for path in emit_tables(report):
        print(path)


if __name__ == "__main__":
    main()
