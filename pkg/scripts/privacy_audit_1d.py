#!/usr/bin/env python3
"""Exact one-dimensional privacy audit over a family of adversarial
neighboring pairs: computes the exact output law of the single cut on S and
on S plus one point, and the two-sided hockey-stick divergence at the
claimed end-to-end budget."""

import argparse
import json

from randmargins.audit import (NeighboringPair,
                               exact_rand_margins_distribution_1d,
                               hockey_stick_divergence)
from randmargins.ipp import ExpMechInteriorPoint, IppParams
from randmargins.learner import PrivacyBudget, RandMarginsParams
from randmargins.model import Dataset, GridDomain, LabeledExample

import numpy as np


def pair_family(x_max, rng):
    yield "point_mass_low", [0] * 60, x_max
    yield "point_mass_high", [x_max] * 60, 0
    yield "two_clusters", [0] * 30 + [x_max] * 30, x_max // 2
    yield "uniform", sorted(rng.integers(0, x_max + 1, size=80).tolist()), x_max
    yield "adjacent_split", [x_max // 2] * 60 + [x_max // 2 + 1] * 60, x_max
    yield "thin_top_tail", [0] * 100 + list(range(x_max - 4, x_max + 1)), x_max


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--x-max", type=int, default=64)
    parser.add_argument("--eps", type=float, default=0.5)
    parser.add_argument("--delta", type=float, default=0.01)
    parser.add_argument("--beta", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    solver = ExpMechInteriorPoint()
    ipp = IppParams(epsilon=args.eps, delta=args.delta, beta=args.beta,
                    domain_max=args.x_max)
    params = RandMarginsParams.from_solver(ipp, solver, seed=0)
    budget = PrivacyBudget(args.eps, args.delta, d=1)
    domain = GridDomain(x_max=args.x_max, d=1)
    rng = np.random.default_rng(args.seed)

    rows = []
    for name, values, extra in pair_family(args.x_max, rng):
        base = Dataset(np.asarray(values, dtype=np.int64)[:, None],
                       np.ones(len(values), dtype=np.int8), domain)
        pair = NeighboringPair(base=base, extra=LabeledExample((extra,), 1))
        p = exact_rand_margins_distribution_1d(pair.base, params).pmf
        q = exact_rand_margins_distribution_1d(pair.extended(), params).pmf
        div = max(hockey_stick_divergence(p, q, budget.epsilon_total),
                  hockey_stick_divergence(q, p, budget.epsilon_total))
        rows.append({"pair": name, "n": len(values), "extra": extra,
                     "divergence": div,
                     "verdict": "pass" if div <= budget.delta_total
                     else "FAIL"})
    print(json.dumps({
        "epsilon_total": budget.epsilon_total,
        "delta_total": budget.delta_total,
        "pairs": rows,
    }, indent=2))


if __name__ == "__main__":
    main()
