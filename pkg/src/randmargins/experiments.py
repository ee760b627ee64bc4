"""Reproducible experiment driving: synthetic data, benchmark orchestration,
declarative configs, and deterministic result persistence.

Seed discipline, bit-exactly: trial ``t`` of a run with master seed ``m``
uses ``splitmix64(m XOR t)`` (all arithmetic modulo 2**64), fed to
``numpy.random.default_rng``. Records carry their seed so any single trial
can be replayed in isolation.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .audit import clopper_pearson
from .errors import InsufficientData, InvalidParams
from .ipp import IppParams, IppSolver, make_solver
from .learner import (EmptyRectangle, RandMarginsParams,
                      baseline_composition_learner, fallback_threshold,
                      rand_margins, required_sample_size)
from .model import (Dataset, ExplicitDistribution, GridDomain, Hypothesis,
                    OriginRectangle, empirical_error, generalization_error,
                    load_distribution_csv)
from .seeding import derive_trial_seed, splitmix64

OUTPUT_DIR_ENV = "RANDMARGINS_OUTDIR"

DIST_KINDS = ("product_uniform", "corner_mass", "file")
LEARNERS = ("rand_margins", "baseline")


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "results"))


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one benchmark run.

    Serialized as flat JSON; every field has a CLI override. ``sample_size``
    of None means "use the computed required sample size".
    """

    x_max: int
    d: int
    target: tuple[int, ...]
    dist: str = "product_uniform"
    dist_path: Optional[str] = None
    learner: str = "rand_margins"
    epsilon: float = 1.0
    delta: float = 1e-6
    alpha: float = 0.1
    beta: float = 0.1
    solver: str = "exp_mech"
    trials: int = 20
    sample_size: Optional[int] = None
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "target", tuple(int(t) for t in self.target))
        domain = self.domain()
        if not domain.contains(self.target):
            raise InvalidParams("target corner falls outside the domain")
        if self.dist not in DIST_KINDS:
            raise InvalidParams(f"dist must be one of {DIST_KINDS}")
        if self.dist == "file" and not self.dist_path:
            raise InvalidParams("dist 'file' needs dist_path")
        if self.learner not in LEARNERS:
            raise InvalidParams(f"learner must be one of {LEARNERS}")
        if self.trials < 1:
            raise InvalidParams("trials must be >= 1")

    def domain(self) -> GridDomain:
        return GridDomain(x_max=self.x_max, d=self.d)

    def ipp_params(self) -> IppParams:
        return IppParams(epsilon=self.epsilon, delta=self.delta,
                         beta=self.beta, domain_max=self.x_max)

    def make_solver(self) -> IppSolver:
        return make_solver(self.solver)

    def to_json_dict(self) -> dict:
        out = asdict(self)
        out["target"] = list(self.target)
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise InvalidParams(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path, overrides: Optional[dict] = None,
                  ) -> "ExperimentConfig":
        with open(path) as fh:
            data = json.load(fh)
        if overrides:
            data.update(overrides)
        return cls.from_json_dict(data)


def config_hash(config: ExperimentConfig) -> str:
    blob = json.dumps(config.to_json_dict(), sort_keys=True,
                      separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Synthetic data. Labels always come from the target rectangle, so every
# generated sample is realizable by construction.


def _load_explicit(config: ExperimentConfig) -> ExplicitDistribution:
    return load_distribution_csv(config.dist_path, x_max=config.x_max)


def generate_synthetic(config: ExperimentConfig, n: int,
                       rng: np.random.Generator) -> Dataset:
    domain = config.domain()
    target = OriginRectangle(config.target)
    if config.dist == "product_uniform":
        highs = np.asarray(config.target, dtype=np.int64) + 1
        coords = rng.integers(0, highs, size=(n, domain.d), dtype=np.int64)
    elif config.dist == "corner_mass":
        coords = np.tile(np.asarray(config.target, dtype=np.int64), (n, 1))
    else:
        coords = _load_explicit(config).sample(n, rng).coords
    labels = target.contains_batch(coords).astype(np.int8)
    return Dataset(coords, labels, domain)


def exact_generalization_error(hypothesis: Hypothesis,
                               config: ExperimentConfig) -> float:
    """Exact error of a hypothesis under the configured distribution.

    product_uniform and corner_mass admit closed forms; file distributions
    are summed over their explicit support.
    """
    if config.dist == "file":
        return generalization_error(hypothesis, _load_explicit(config))
    if isinstance(hypothesis, EmptyRectangle):
        return 1.0  # every generated label is positive
    corner = np.asarray(hypothesis.corner, dtype=np.int64)
    target = np.asarray(config.target, dtype=np.int64)
    if config.dist == "corner_mass":
        return 0.0 if bool((corner >= target).all()) else 1.0
    inside = np.minimum(corner, target) + 1
    mass = float(np.prod(inside / (target + 1.0)))
    return 1.0 - mass


# ---------------------------------------------------------------------------
# Benchmark records and deterministic reporting.

RESULT_COLUMNS = (
    "config_hash", "trial", "seed", "n", "n_pos", "fallback", "error",
    "empirical_error", "generalization_error", "removed_total",
    "max_clamped_size", "clamp_events", "solver_failures",
)


@dataclass(frozen=True)
class ResultRecord:
    config_hash: str
    trial: int
    seed: int
    n: int
    n_pos: int
    fallback: bool
    error: str
    empirical_error: float
    generalization_error: float
    removed_total: int
    max_clamped_size: int
    clamp_events: int
    solver_failures: int
    wall_time_s: float

    def csv_row(self) -> list:
        # wall time is intentionally excluded: CSV output is byte-stable
        # under identical (config, seed)
        return [self.config_hash, self.trial, self.seed, self.n, self.n_pos,
                int(self.fallback), self.error,
                repr(self.empirical_error), repr(self.generalization_error),
                self.removed_total, self.max_clamped_size, self.clamp_events,
                self.solver_failures]


def _run_single_trial(config: ExperimentConfig, trial: int, n: int,
                      chash: str) -> ResultRecord:
    seed = derive_trial_seed(config.master_seed, trial)
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    dataset = generate_synthetic(config, n, rng)
    solver = config.make_solver()
    ipp = config.ipp_params()

    fallback = False
    error = ""
    removed_total = max_clamped = clamp_events = solver_failures = 0
    hypothesis: Hypothesis = EmptyRectangle()
    try:
        if config.learner == "rand_margins":
            params = RandMarginsParams.from_solver(ipp, solver, seed)
            pos = dataset.positives()
            if len(pos) < fallback_threshold(params):
                fallback = True
            else:
                hypothesis, trace = rand_margins(pos, params, solver,
                                                 trace_detail="light")
                removed_total = trace.removed_total
                max_clamped = trace.max_clamped_size
                clamp_events = trace.clamp_events
                solver_failures = trace.solver_failures
        else:
            result = baseline_composition_learner(
                dataset, config.epsilon, config.delta, config.beta, solver,
                seed=seed)
            hypothesis = result.hypothesis
    except InsufficientData as exc:
        error = str(exc)

    emp = float(empirical_error(hypothesis, dataset))
    gen = exact_generalization_error(hypothesis, config)
    wall = time.perf_counter() - start
    return ResultRecord(
        config_hash=chash, trial=trial, seed=seed, n=n,
        n_pos=int(np.count_nonzero(dataset.labels == 1)),
        fallback=fallback, error=error, empirical_error=emp,
        generalization_error=gen, removed_total=removed_total,
        max_clamped_size=max_clamped, clamp_events=clamp_events,
        solver_failures=solver_failures, wall_time_s=wall)


def run_learning_benchmark(config: ExperimentConfig,
                           ) -> tuple[list[ResultRecord], dict]:
    """One record per trial; learner errors are recorded, never raised."""
    chash = config_hash(config)
    if config.sample_size is not None:
        n = config.sample_size
    else:
        n = required_sample_size(config.alpha, config.d, config.ipp_params(),
                                 config.make_solver())
    records = [_run_single_trial(config, t, n, chash)
               for t in range(config.trials)]
    summary = summarize_records(records, config)
    return records, summary


def summarize_records(records: Sequence[ResultRecord],
                      config: ExperimentConfig) -> dict:
    failures = [r for r in records if r.generalization_error > config.alpha]
    n_rec = len(records)
    # clamp frequency is per executed iteration, so fallback and errored
    # trials do not enter the denominator
    ran = sum(1 for r in records if not r.fallback and not r.error)
    if n_rec:
        lo, hi = clopper_pearson(len(failures), n_rec)
        clamp_freq = (sum(r.clamp_events for r in records)
                      / (ran * config.d) if ran else 0.0)
    else:
        lo = hi = clamp_freq = 0.0
    return {
        "config_hash": config_hash(config),
        "trials": n_rec,
        "alpha": config.alpha,
        "beta": config.beta,
        "failure_count": len(failures),
        "failure_frequency": len(failures) / n_rec if n_rec else 0.0,
        "failure_ci_low": lo,
        "failure_ci_high": hi,
        "mean_generalization_error": (
            float(np.mean([r.generalization_error for r in records]))
            if n_rec else 0.0),
        "mean_empirical_error": (
            float(np.mean([r.empirical_error for r in records]))
            if n_rec else 0.0),
        "clamp_frequency": clamp_freq,
        "error_trials": sum(1 for r in records if r.error),
        "fallback_trials": sum(1 for r in records if r.fallback),
    }


def emit_report(records: Sequence[ResultRecord], csv_path,
                json_path=None, summary: Optional[dict] = None) -> dict:
    """Deterministic CSV plus a JSON summary carrying a content hash of the
    CSV bytes; identical configs and seeds reproduce identical files."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for record in records:
            writer.writerow(record.csv_row())
    content_sha = hashlib.sha256(csv_path.read_bytes()).hexdigest()
    out = dict(summary or {})
    out["csv_sha256"] = content_sha
    out["records"] = len(records)
    if json_path is not None:
        json_path = Path(json_path)
        json_path.parent.mkdir(parents=True, exist_ok=True)
        json_path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    return out


def sweep_sample_sizes(base_config: ExperimentConfig,
                       n_values: Sequence[int]) -> list[dict]:
    """Error versus sample size, everything else fixed; one row per n.

    Each row carries a ``monotone_flag``: True marks a statistically clear
    increase of the mean error over the previous (smaller) sample size,
    which is reported but deliberately never an error.
    """
    rows = []
    prev = None
    for n in n_values:
        config = replace_config(base_config, sample_size=int(n))
        records, summary = run_learning_benchmark(config)
        errs = np.array([r.generalization_error for r in records])
        mean = float(errs.mean())
        std = float(errs.std(ddof=1)) if len(errs) > 1 else 0.0
        flag = False
        if prev is not None:
            se = math.sqrt(std ** 2 / len(errs)
                           + prev["std_error"] ** 2 / prev["trials"])
            flag = mean > prev["mean_error"] + 3.0 * se
        row = {
            "n": int(n),
            "trials": len(records),
            "mean_error": mean,
            "std_error": std,
            "failure_frequency": summary["failure_frequency"],
            "monotone_flag": flag,
        }
        rows.append(row)
        prev = row
    return rows


def replace_config(config: ExperimentConfig, **changes) -> ExperimentConfig:
    data = config.to_json_dict()
    data.update(changes)
    return ExperimentConfig.from_json_dict(data)


def sweep_dimensions(base_config: ExperimentConfig, d_values: Sequence[int],
                     learners: Sequence[str] = LEARNERS,
                     ) -> list[dict]:
    """Error versus dimension at a fixed sample size, one row per
    (d, learner); the target corner is broadcast to each dimension."""
    if base_config.sample_size is None:
        raise InvalidParams("dimension sweeps need an explicit sample_size")
    rows = []
    for d in d_values:
        target = tuple(base_config.target[:1]) * d
        for learner in learners:
            config = ExperimentConfig(
                x_max=base_config.x_max, d=d, target=target,
                dist=base_config.dist, dist_path=base_config.dist_path,
                learner=learner, epsilon=base_config.epsilon,
                delta=base_config.delta, alpha=base_config.alpha,
                beta=base_config.beta, solver=base_config.solver,
                trials=base_config.trials,
                sample_size=base_config.sample_size,
                master_seed=base_config.master_seed)
            records, summary = run_learning_benchmark(config)
            errs = np.array([r.generalization_error for r in records])
            rows.append({
                "d": d,
                "learner": learner,
                "trials": len(records),
                "mean_error": float(errs.mean()),
                "std_error": float(errs.std(ddof=1)) if len(errs) > 1 else 0.0,
                "failure_frequency": summary["failure_frequency"],
                "error_trials": summary["error_trials"],
            })
    return rows
