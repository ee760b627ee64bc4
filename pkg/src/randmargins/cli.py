"""Command line interface.

Subcommands: gen (synthetic data), learn (fit one dataset), ipp (solver
contract benchmarking), audit (exact-1d | mc | concentration | game), game
(shorthand for audit --mode game), bench (config-driven benchmark runs).
Audit reports share the schema {mode, params, estimate, ci_low, ci_high,
claimed_bound, verdict}.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import audit as audit_mod
from .errors import RandMarginsError
from .experiments import (ExperimentConfig, default_output_dir,
                          derive_trial_seed, emit_report,
                          generate_synthetic, run_learning_benchmark)
from .ipp import IppParams, make_solver, solve_interior_point
from .learner import (EmptyRectangle, PrivacyBudget, RandMarginsParams,
                      baseline_composition_learner, learn_rectangle,
                      rand_margins, required_sample_size, write_trace_jsonl)
from .model import (LabeledExample, dataset_sha, empirical_error,
                    load_dataset_csv, save_dataset_csv)


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _parse_ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v != ""]


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v != ""]


def _audit_report(mode: str, params: dict, estimate: float, ci_low: float,
                  ci_high: float, claimed_bound: float, ok: bool) -> dict:
    return {
        "mode": mode,
        "params": params,
        "estimate": estimate,
        "ci_low": ci_low,
        "ci_high": ci_high,
        "claimed_bound": claimed_bound,
        "verdict": "pass" if ok else "FAIL",
    }


def cmd_gen(args) -> int:
    config = ExperimentConfig(
        x_max=args.x_max, d=args.d, target=tuple(_parse_ints(args.target)),
        dist=args.dist, dist_path=args.dist_path, trials=1,
        master_seed=args.seed)
    rng = np.random.default_rng(derive_trial_seed(args.seed, 0))
    dataset = generate_synthetic(config, args.n, rng)
    out = Path(args.out) if args.out else default_output_dir() / "data.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset_csv(dataset, out)
    _emit({"written": str(out), "n": len(dataset),
           "n_pos": int(dataset.labels.sum()), "sha": dataset_sha(dataset)})
    return 0


def cmd_learn(args) -> int:
    dataset = load_dataset_csv(args.data, x_max=args.x_max)
    solver = make_solver(args.solver)
    ipp = IppParams(epsilon=args.eps, delta=args.delta, beta=args.beta,
                    domain_max=args.x_max)
    needed = required_sample_size(args.alpha, dataset.domain.d, ipp, solver)
    out = {
        "n": len(dataset),
        "n_pos": int((dataset.labels == 1).sum()),
        "required_sample_size": needed,
        "seed": args.seed,
        "solver": solver.name,
    }
    if args.learner == "baseline":
        result = baseline_composition_learner(
            dataset, args.eps, args.delta, args.beta, solver, seed=args.seed)
        hypothesis = result.hypothesis
        out["baseline_low"] = list(result.low)
        out["baseline_high"] = list(result.high)
        out["eps_per_call"] = result.eps_per_call
    else:
        params = RandMarginsParams.from_solver(ipp, solver, args.seed)
        pos = dataset.positives()
        hypothesis = learn_rectangle(dataset, params, solver)
        if args.trace_out and not isinstance(hypothesis, EmptyRectangle):
            _, trace = rand_margins(pos, params, solver, trace_detail="full")
            write_trace_jsonl(trace, args.trace_out)
            out["trace"] = args.trace_out
        budget = PrivacyBudget(args.eps, args.delta, dataset.domain.d)
        out["epsilon_total"] = budget.epsilon_total
        out["delta_total"] = budget.delta_total
    if isinstance(hypothesis, EmptyRectangle):
        out["hypothesis"] = {"empty": True}
    else:
        out["hypothesis"] = {"empty": False, "corner": list(hypothesis.corner)}
        out["empirical_error"] = float(empirical_error(hypothesis, dataset))
    _emit(out)
    return 0


def cmd_ipp(args) -> int:
    solver = make_solver(args.solver)
    params = IppParams(epsilon=args.eps, delta=args.delta, beta=args.beta,
                       domain_max=args.x_max)
    n = solver.sample_complexity(params)
    if args.values:
        values = np.asarray(_parse_ints(args.values), dtype=np.int64)
    else:
        rng = np.random.default_rng(derive_trial_seed(args.seed, 0))
        values = rng.integers(0, args.x_max + 1, size=n)
    lo, hi = int(values.min()), int(values.max())
    failures = 0
    rng = np.random.default_rng(derive_trial_seed(args.seed, 1))
    for _ in range(args.trials):
        v = solve_interior_point(solver, values, params, rng)
        if not lo <= v <= hi:
            failures += 1
    _emit({"solver": solver.name, "n": n, "eps": args.eps, "beta": args.beta,
           "trials": args.trials, "failures": failures,
           "values_n": int(values.size)})
    return 0


def _audit_exact_1d(args) -> dict:
    dataset = load_dataset_csv(args.data, x_max=args.x_max).positives()
    extra = LabeledExample((args.extra,), 1)
    pair = audit_mod.NeighboringPair(base=dataset, extra=extra)
    solver = make_solver("exp_mech")
    ipp = IppParams(epsilon=args.eps, delta=args.delta, beta=args.beta,
                    domain_max=args.x_max)
    params = RandMarginsParams.from_solver(ipp, solver, seed=0)
    p = audit_mod.exact_rand_margins_distribution_1d(pair.base, params).pmf
    q = audit_mod.exact_rand_margins_distribution_1d(pair.extended(),
                                                     params).pmf
    budget = PrivacyBudget(args.eps, args.delta, d=1)
    div = max(audit_mod.hockey_stick_divergence(p, q, budget.epsilon_total),
              audit_mod.hockey_stick_divergence(q, p, budget.epsilon_total))
    return _audit_report(
        "exact-1d",
        {"eps": args.eps, "delta": args.delta, "beta": args.beta,
         "x_max": args.x_max, "extra": args.extra,
         "epsilon_total": budget.epsilon_total},
        estimate=div, ci_low=div, ci_high=div,
        claimed_bound=budget.delta_total, ok=div <= budget.delta_total)


def _audit_mc(args) -> dict:
    dataset = load_dataset_csv(args.data, x_max=args.x_max).positives()
    extra = LabeledExample(tuple(_parse_ints(args.extra_coords)), 1)
    pair = audit_mod.NeighboringPair(base=dataset, extra=extra)
    solver = make_solver(args.solver)
    ipp = IppParams(epsilon=args.eps, delta=args.delta, beta=args.beta,
                    domain_max=args.x_max)
    params = RandMarginsParams.from_solver(ipp, solver, seed=0)
    budget = PrivacyBudget(args.eps, args.delta, dataset.domain.d)
    report = audit_mod.monte_carlo_privacy_lower_bound(
        audit_mod.rand_margins_mechanism(params, solver), pair, args.trials,
        budget.epsilon_total, budget.delta_total, master_seed=args.seed)
    return _audit_report(
        "mc",
        {"eps": args.eps, "delta": args.delta, "beta": args.beta,
         "trials": args.trials, "events": report.events_checked},
        estimate=report.epsilon_hat, ci_low=0.0,
        ci_high=report.epsilon_hat,
        claimed_bound=report.epsilon_budget, ok=not report.violation)


def _audit_concentration(args) -> dict:
    solver = make_solver("exp_mech")
    ipp = IppParams(epsilon=args.eps, delta=args.ipp_delta, beta=args.beta,
                    domain_max=args.x_max)
    params = RandMarginsParams.from_solver(ipp, solver, seed=0)
    pair = audit_mod.make_top_heavy_pair(args.x_max, args.d, args.n, params,
                                         seed=args.seed)
    report = audit_mod.concentration_experiment(
        pair, params, solver, args.trials, args.delta,
        master_seed=args.seed)
    return _audit_report(
        "concentration",
        {"d": args.d, "n": args.n, "trials": args.trials,
         "delta": args.delta, "threshold": report.threshold,
         "mean_paying": report.mean_paying,
         "error_trials": report.error_trials},
        estimate=report.empirical_tail, ci_low=0.0,
        ci_high=report.tail_upper_bound, claimed_bound=args.delta,
        ok=report.ok)


def _audit_game(args) -> dict:
    strategies = {
        "constant": audit_mod.constant_strategy(0.5, 0.125),
        "boundary": audit_mod.boundary_strategy(0.5),
        "greedy": audit_mod.greedy_strategy(min(_parse_floats(args.gammas))),
    }
    config = audit_mod.GameConfig(rounds=args.rounds,
                                  strategy=strategies[args.strategy])
    rng = np.random.default_rng(derive_trial_seed(args.seed, 0))
    report = audit_mod.adversary_game_simulator(
        config, args.episodes, rng, gammas=_parse_floats(args.gammas))
    worst = max(report.tails, key=lambda r: r.ci_high - r.claimed_bound)
    out = _audit_report(
        "game",
        {"strategy": args.strategy, "rounds": args.rounds,
         "episodes": args.episodes, "mean_score": report.mean_score},
        estimate=worst.estimate, ci_low=worst.ci_low, ci_high=worst.ci_high,
        claimed_bound=worst.claimed_bound, ok=report.ok)
    out["tails"] = [{"gamma": r.gamma, "estimate": r.estimate,
                     "ci_high": r.ci_high, "claimed_bound": r.claimed_bound,
                     "ok": r.ok} for r in report.tails]
    return out


def cmd_audit(args) -> int:
    handlers = {"exact-1d": _audit_exact_1d, "mc": _audit_mc,
                "concentration": _audit_concentration, "game": _audit_game}
    report = handlers[args.mode](args)
    _emit(report)
    return 0 if report["verdict"] == "pass" else 1


def cmd_bench(args) -> int:
    overrides = {}
    for item in args.set or []:
        key, _, value = item.partition("=")
        overrides[key] = json.loads(value)
    if args.config:
        config = ExperimentConfig.from_file(args.config, overrides)
    else:
        config = ExperimentConfig.from_json_dict(overrides)
    records, summary = run_learning_benchmark(config)
    out_dir = Path(args.out_dir) if args.out_dir else default_output_dir()
    csv_path = out_dir / f"bench_{summary['config_hash']}.csv"
    json_path = out_dir / f"bench_{summary['config_hash']}.json"
    summary = emit_report(records, csv_path, json_path, summary)
    summary["csv"] = str(csv_path)
    _emit(summary)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randmargins",
        description="Private learning of origin-placed rectangles, with audits.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic labeled dataset")
    p.add_argument("--x-max", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--target", required=True,
                   help="comma separated corner, e.g. 5,5")
    p.add_argument("--dist", default="product_uniform")
    p.add_argument("--dist-path", default=None)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("learn", help="fit one dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--x-max", type=int, required=True)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--solver", default="exp_mech")
    p.add_argument("--learner", default="rand_margins",
                   choices=["rand_margins", "baseline"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace-out", default=None)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("ipp", help="ad-hoc interior point solving and "
                                   "contract benchmarking")
    p.add_argument("--x-max", type=int, required=True)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--solver", default="exp_mech")
    p.add_argument("--values", default=None,
                   help="comma separated; default is a random multiset of "
                        "the required size")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ipp)

    p = sub.add_parser("audit", help="privacy and concentration audits")
    p.add_argument("--mode", required=True,
                   choices=["exact-1d", "mc", "concentration", "game"])
    p.add_argument("--data", default=None)
    p.add_argument("--x-max", type=int, default=64)
    p.add_argument("--extra", type=int, default=0,
                   help="added point coordinate for exact-1d")
    p.add_argument("--extra-coords", default="0",
                   help="comma separated added point for mc")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--ipp-delta", type=float, default=0.01,
                   help="per-call delta for concentration runs")
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--solver", default="exp_mech")
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--rounds", type=int, default=200)
    p.add_argument("--episodes", type=int, default=100000)
    p.add_argument("--strategy", default="constant",
                   choices=["constant", "boundary", "greedy"])
    p.add_argument("--gammas", default="35,50,70")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("game", help="survival game simulation "
                                    "(same as audit --mode game)")
    p.add_argument("--rounds", type=int, default=200)
    p.add_argument("--episodes", type=int, default=100000)
    p.add_argument("--strategy", default="constant",
                   choices=["constant", "boundary", "greedy"])
    p.add_argument("--gammas", default="35,50,70")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_audit, mode="game")

    p = sub.add_parser("bench", help="config-driven learning benchmark")
    p.add_argument("--config", default=None)
    p.add_argument("--set", action="append", metavar="KEY=JSONVALUE",
                   help="override a config field; repeatable")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (RandMarginsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
