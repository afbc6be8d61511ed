"""MRW intermittency grid: temporal multiscaling with Gaussian marginals."""

import argparse

from multiscaling import ExperimentConfig, emit_tables, run_experiment, write_report_csv

LAMBDAS = (0.05, 0.15, 0.25)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/mrw_grid")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--full", action="store_true")
    args = ap.parse_args()

    scale = dict(n_sims=1000, path_length=10_000, i_count=1000, j_count=1000) if args.full \
        else dict(n_sims=100, path_length=4096, i_count=200, j_count=200)
    config = ExperimentConfig(
        process="mrw",
        grid=tuple({"lam": lam} for lam in LAMBDAS),
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
