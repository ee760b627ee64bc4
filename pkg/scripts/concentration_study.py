#!/usr/bin/env python3
"""Paying-iteration concentration on an adversarial top-heavy pair: how often
does the added point land inside the noisy block before being deleted, and
does the tail stay below the claimed threshold?"""

import argparse
import json

from randmargins.audit import concentration_experiment, make_top_heavy_pair
from randmargins.ipp import ExpMechInteriorPoint, IppParams
from randmargins.learner import RandMarginsParams


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--d", type=int, default=64)
    parser.add_argument("--n", type=int, default=27000)
    parser.add_argument("--x-max", type=int, default=10 ** 6)
    parser.add_argument("--eps", type=float, default=1.0)
    parser.add_argument("--beta", type=float, default=0.24)
    parser.add_argument("--delta", type=float, default=0.05,
                        help="tail probability target")
    parser.add_argument("--trials", type=int, default=2000)
    parser.add_argument("--depth", type=float, default=1.0)
    parser.add_argument("--seed", type=int, default=2024)
    args = parser.parse_args()

    solver = ExpMechInteriorPoint()
    ipp = IppParams(epsilon=args.eps, delta=1e-6, beta=args.beta,
                    domain_max=args.x_max)
    params = RandMarginsParams.from_solver(ipp, solver, seed=0)
    pair = make_top_heavy_pair(args.x_max, args.d, args.n, params,
                               seed=args.seed, depth=args.depth)
    report = concentration_experiment(pair, params, solver, args.trials,
                                      args.delta, master_seed=args.seed)
    print(json.dumps({
        "d": args.d, "n": args.n, "trials": args.trials,
        "completed": report.completed, "error_trials": report.error_trials,
        "threshold": report.threshold, "exceed": report.exceed_count,
        "empirical_tail": report.empirical_tail,
        "tail_upper_bound": report.tail_upper_bound,
        "mean_paying": report.mean_paying,
        "histogram": list(report.histogram),
        "ok": report.ok,
    }, indent=2))


if __name__ == "__main__":
    main()
