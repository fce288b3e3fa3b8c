#!/usr/bin/env python3
"""Run the full synthetic-benchmark experiment with default settings.

Writes summary.csv, per-seed reports, timelines, correlation matrices and
checkpoints under --output (default: results/disjoint).
"""

import argparse

from lifelong.experiment import ExperimentConfig, run_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output", default="results/disjoint")
    parser.add_argument("--seeds", type=int, default=10,
                        help="number of seeds (0..N-1)")
    parser.add_argument("--order", default="random",
                        choices=("random", "as_listed", "one_by_one_clusters"))
    parser.add_argument("--eval-every-task", action="store_true")
    args = parser.parse_args()

    config = ExperimentConfig(
        dataset={"type": "disjoint"},
        seeds=tuple(range(args.seeds)),
        task_order=args.order,
        output_dir=args.output,
        eval_every_task=args.eval_every_task,
    )
    out = run_experiment(config)
    print(f"wrote {out}/summary.csv")
    print((out / "summary.csv").read_text())


if __name__ == "__main__":
    main()
