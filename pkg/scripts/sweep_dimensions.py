#!/usr/bin/env python3
"""Error versus dimension at a fixed sample size, for the noisy-margin
learner and the composition baseline. Writes one CSV row per (d, learner)."""

import argparse
import csv
from pathlib import Path

from randmargins.experiments import (ExperimentConfig, default_output_dir,
                                     sweep_dimensions)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dims", default="2,4,8,16,32")
    parser.add_argument("--trials", type=int, default=100)
    parser.add_argument("--sample-size", type=int, default=40000)
    parser.add_argument("--x-max", type=int, default=10 ** 6)
    parser.add_argument("--eps", type=float, default=1.0)
    parser.add_argument("--delta", type=float, default=1e-6)
    parser.add_argument("--beta", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=909)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    config = ExperimentConfig(
        x_max=args.x_max, d=2, target=(args.x_max, args.x_max),
        dist="product_uniform", epsilon=args.eps, delta=args.delta,
        alpha=0.1, beta=args.beta, solver="exp_mech", trials=args.trials,
        sample_size=args.sample_size, master_seed=args.seed)
    dims = [int(v) for v in args.dims.split(",")]
    rows = sweep_dimensions(config, dims)

    out = Path(args.out) if args.out else default_output_dir() / "sweep_d.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    for r in rows:
        print(f"d={r['d']:>3} {r['learner']:<13} "
              f"mean_error={r['mean_error']:.4f} "
              f"(+-{r['std_error']:.4f}, {r['trials']} trials)")
    print(f"written: {out}")


if __name__ == "__main__":
    main()
