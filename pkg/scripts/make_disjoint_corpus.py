#!/usr/bin/env python3
"""Generate the synthetic disjoint-cluster corpus and write it to disk in
the manifest + per-task CSV format the loader understands."""

import argparse

from lifelong.datasets import generate_disjoint, save_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--clusters", type=int, default=3)
    parser.add_argument("--tasks-per-cluster", type=int, default=10)
    parser.add_argument("--dim", type=int, default=40)
    parser.add_argument("--samples", type=int, default=50)
    parser.add_argument("--noise-std", type=float, default=0.1)
    args = parser.parse_args()

    corpus = generate_disjoint(seed=args.seed, clusters=args.clusters,
                               tasks_per_cluster=args.tasks_per_cluster,
                               d=args.dim, n_per_task=args.samples,
                               noise_std=args.noise_std)
    manifest = save_corpus(corpus, args.out_dir)
    print(f"wrote {len(corpus)} tasks to {manifest}")


if __name__ == "__main__":
    main()
