"""Rough-Bergomi H grid study: the main attribution tables.

Desk scale by default (100 sims, N=4096, I=J=200); --full switches to the
source study's scale (1000 sims, N=10^4, I=J=1000), which is a multi-day
single-machine run.
"""

import argparse

from multiscaling import (
    ExperimentConfig,
    emit_figure_data,
    emit_tables,
    run_experiment,
    write_report_csv,
)

HS = (0.001, 0.005, 0.01, 0.05, 0.1, 0.2)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/rbergomi_grid")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--full", action="store_true", help="source-study scale")
    args = ap.parse_args()

    scale = dict(n_sims=1000, path_length=10_000, i_count=1000, j_count=1000) if args.full \
        else dict(n_sims=100, path_length=4096, i_count=200, j_count=200)
    config = ExperimentConfig(
        process="rbergomi",
        grid=tuple({"hurst": h} for h in HS),
        out_dir=args.out,
        base_seed=args.seed,
        workers=args.workers,
        **scale,
    )
    report = run_experiment(config)
    print(write_report_csv(report))
    for path in emit_tables(report) + emit_figure_data(report):
        print(path)


if __name__ == "__main__":
    main()
