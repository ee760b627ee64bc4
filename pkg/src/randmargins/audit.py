"""Statistical and exact verification of the privacy and concentration
claims: exact one-dimensional output distributions, hockey-stick divergence,
Monte-Carlo privacy lower bounds, paired-trace iteration partitions, and the
abstract survival game behind the concentration bound.

All empirical probability claims are reported with one-sided Clopper-Pearson
bounds at 99% confidence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import (InsufficientData, InvalidParams, InvalidStrategy,
                     PairingError)
from .ipp import ExpMechInteriorPoint
from .learner import RandMarginsParams, RunTrace, rand_margins
from .model import Dataset, GridDomain, LabeledExample
from .noise import ceil_shifted_laplace_cdf, ceil_shifted_laplace_pmf
from .seeding import derive_trial_seed

DEFAULT_CONFIDENCE = 0.99

# tail threshold multiplier of the concentration claim: at most
# 35 * ln(1/delta) paying iterations except with probability delta
CONCENTRATION_FACTOR = 35.0

# survival game tail bound exp(-gamma/5 + 6); vacuous below gamma = 30
GAME_BOUND_RATE = 0.2
GAME_BOUND_OFFSET = 6.0


def clopper_pearson(successes: int, trials: int,
                    confidence: float = DEFAULT_CONFIDENCE,
                    ) -> tuple[float, float]:
    """Two one-sided Clopper-Pearson bounds at the given confidence each."""
    if trials <= 0 or not 0 <= successes <= trials:
        raise InvalidParams("need 0 <= successes <= trials, trials > 0")
    alpha = 1.0 - confidence
    if successes == 0:
        lo = 0.0
    else:
        lo = float(stats.beta.ppf(alpha, successes, trials - successes + 1))
    if successes == trials:
        hi = 1.0
    else:
        hi = float(stats.beta.ppf(confidence, successes + 1,
                                  trials - successes))
    return lo, hi


def game_tail_bound(gamma: float) -> float:
    return math.exp(-GAME_BOUND_RATE * gamma + GAME_BOUND_OFFSET)


# ---------------------------------------------------------------------------
# Neighboring pairs and the iteration partition of paired traces.


@dataclass(frozen=True)
class NeighboringPair:
    """Add/remove neighbors: the extended dataset is base plus one example,
    appended last so shared rows keep their ids."""

    base: Dataset
    extra: LabeledExample

    def __post_init__(self):
        if not self.base.domain.contains(self.extra.coords):
            raise InvalidParams("extra example falls outside the domain")

    @property
    def extra_id(self) -> int:
        return len(self.base)

    def extended(self) -> Dataset:
        return self.base.append(self.extra)


@dataclass(frozen=True)
class IterationPartition:
    """Indices split by the role the added point played.

    ``i_star`` is the first iteration whose cut fell strictly below the
    added point's coordinate (None if that never happened, in which case
    every iteration counts as at-or-before it). ``paying`` are iterations at
    or before i_star where the point sat inside the noisy block, ``silent``
    the earlier iterations where it did not, ``after`` everything past
    i_star.
    """

    i_star: Optional[int]
    paying: tuple[int, ...]
    silent: tuple[int, ...]
    after: tuple[int, ...]

    @property
    def e_in(self) -> tuple[int, ...]:
        return self.paying

    @property
    def e_out(self) -> tuple[int, ...]:
        return self.silent

    @property
    def e_after(self) -> tuple[int, ...]:
        return self.after


def _block_membership(trace: RunTrace, member_id: int) -> list[bool]:
    flags = []
    for it in trace.iterations:
        if it.block_ids is not None:
            flags.append(member_id in it.block_ids)
        elif trace.track_id == member_id and it.tracked_in_block is not None:
            flags.append(it.tracked_in_block)
        else:
            raise PairingError(
                "trace records neither block ids nor membership of the "
                "added point; rerun with trace_detail='full' or "
                f"track={member_id}")
    return flags


def partition_iterations(trace: RunTrace, trace_prime: RunTrace,
                         pair: NeighboringPair) -> IterationPartition:
    """Partition iterations from a paired pair of traces.

    ``trace`` is the run on the base dataset, ``trace_prime`` on the
    extended one; both must use the same seed and parameters. Membership and
    cuts are read from the extended run, where the added point exists.
    """
    if not trace.same_run_setup(trace_prime):
        raise PairingError("traces do not come from paired executions")
    if trace_prime.n_input != len(pair.base) + 1:
        raise PairingError("extended trace does not match the pair")
    x = pair.extra.coords
    cuts = [it.cut for it in trace_prime.iterations]
    member = _block_membership(trace_prime, pair.extra_id)

    i_star: Optional[int] = None
    for i, cut in enumerate(cuts):
        if x[i] > cut:
            i_star = i
            break
    # with no qualifying iteration, everything counts as at-or-before it
    limit = len(cuts) if i_star is None else i_star
    paying = tuple(i for i in range(len(cuts))
                   if i <= limit and member[i])
    silent = tuple(i for i in range(len(cuts))
                   if i < limit and not member[i])
    after = tuple(i for i in range(len(cuts)) if i > limit)
    return IterationPartition(i_star=i_star, paying=paying, silent=silent,
                              after=after)


# ---------------------------------------------------------------------------
# Concentration experiment: how many paying iterations does an adversarial
# added point actually get?


@dataclass(frozen=True)
class ConcentrationReport:
    trials: int
    completed: int
    error_trials: int
    threshold: float
    exceed_count: int
    empirical_tail: float
    tail_upper_bound: float
    mean_paying: float
    histogram: tuple[int, ...]
    delta_target: float

    @property
    def ok(self) -> bool:
        return self.tail_upper_bound <= self.delta_target


def concentration_experiment(pair: NeighboringPair,
                             params: RandMarginsParams, solver,
                             trials: int, delta_target: float, *,
                             master_seed: int = 0,
                             confidence: float = DEFAULT_CONFIDENCE,
                             ) -> ConcentrationReport:
    """Paired executions over independent seeds, reporting the empirical
    tail of the paying-iteration count against 35 * ln(1/delta)."""
    if trials < 10 ** 3:
        raise InvalidParams("need at least 1000 trials for a meaningful tail")
    if not 0 < delta_target < 1:
        raise InvalidParams("delta_target must be in (0, 1)")
    threshold = CONCENTRATION_FACTOR * math.log(1.0 / delta_target)
    base = pair.base
    extended = pair.extended()
    counts: list[int] = []
    errors = 0
    for t in range(trials):
        seed = derive_trial_seed(master_seed, t)
        run_params = replace(params, seed=seed)
        try:
            _, trace = rand_margins(base, run_params, solver,
                                    trace_detail="light")
            _, trace_prime = rand_margins(extended, run_params, solver,
                                          trace_detail="light",
                                          track=pair.extra_id)
        except InsufficientData:
            errors += 1
            continue
        part = partition_iterations(trace, trace_prime, pair)
        counts.append(len(part.paying))
    completed = len(counts)
    if completed == 0:
        raise InsufficientData("every paired trial failed")
    arr = np.asarray(counts)
    exceed = int(np.count_nonzero(arr > threshold))
    _, upper = clopper_pearson(exceed, completed, confidence)
    hist = np.bincount(arr)
    return ConcentrationReport(
        trials=trials, completed=completed, error_trials=errors,
        threshold=threshold, exceed_count=exceed,
        empirical_tail=exceed / completed, tail_upper_bound=upper,
        mean_paying=float(arr.mean()), histogram=tuple(int(x) for x in hist),
        delta_target=delta_target)


def make_top_heavy_pair(x_max: int, d: int, n: int,
                        params: RandMarginsParams, *, seed: int = 0,
                        depth: float = 1.0) -> NeighboringPair:
    """Adversarial pair: a uniform sea plus an added point that sits near
    the top of every axis, around the expected noisy block boundary, so it
    keeps re-entering blocks instead of being deleted immediately.

    ``depth`` scales the target rank (in units of the block mean).
    """
    rng = np.random.default_rng(seed)
    coords = rng.integers(0, x_max + 1, size=(n, d), dtype=np.int64)
    labels = np.ones(n, dtype=np.int8)
    base = Dataset(coords, labels, GridDomain(x_max=x_max, d=d))
    mu = params.block_mean
    target_rank = depth * mu
    per_axis_removed = max(mu - params.inner_size / 2.0, 1.0)
    extra_coords = []
    for i in range(d):
        survivors = max(n - i * per_axis_removed, target_rank + 1.0)
        frac = min(target_rank / survivors, 1.0)
        extra_coords.append(int(round(x_max * (1.0 - frac))))
    extra = LabeledExample(tuple(extra_coords), 1)
    return NeighboringPair(base=base, extra=extra)


def make_staircase_pair(d: int, n: int, step: int = 1) -> NeighboringPair:
    """Chain-structured pair: points on the diagonal (step*i, ..., step*i)
    for i = 1..n plus an added maximal point. Removing the added point
    shifts every fixed-size extreme block by one row, so a fixed-block
    learner with deletion diverges on every axis. A larger step widens the
    value gaps, which keeps the exponential-mechanism failure probability
    low on this instance."""
    if step < 1:
        raise InvalidParams("step must be >= 1")
    x_max = step * (n + 2)
    vals = step * np.arange(1, n + 1, dtype=np.int64)
    coords = np.repeat(vals[:, None], d, axis=1)
    labels = np.ones(n, dtype=np.int8)
    base = Dataset(coords, labels, GridDomain(x_max=x_max, d=d))
    extra = LabeledExample((step * (n + 1),) * d, 1)
    return NeighboringPair(base=base, extra=extra)


# ---------------------------------------------------------------------------
# The abstract survival game. Each round the adversary picks probabilities
# (q, qbar) with 0 <= q <= 1/2 and q/4 <= qbar <= 1 - q, then X is drawn
# with P[X=1] = q and P[X=2] = qbar. The score counts rounds with X = 1
# before the first X = 2.

Strategy = Callable[[int, np.ndarray, np.ndarray], tuple]


@dataclass(frozen=True)
class GameConfig:
    rounds: int
    strategy: Strategy

    def __post_init__(self):
        if self.rounds < 1:
            raise InvalidParams("rounds must be >= 1")


@dataclass(frozen=True)
class GameEpisode:
    x: tuple[int, ...]
    z: tuple[int, ...]
    score: int


def constant_strategy(q: float, qbar: float) -> Strategy:
    def strategy(i, scores, alive):
        return q, qbar
    return strategy


def boundary_strategy(q: float = 0.5) -> Strategy:
    """Minimal allowed stopping probability qbar = q/4 every round."""
    def strategy(i, scores, alive):
        return q, q / 4.0
    return strategy


def greedy_strategy(target: float) -> Strategy:
    """History-adaptive: push at the boundary until the target score is
    passed, then go inert."""
    def strategy(i, scores, alive):
        push = scores <= target
        q = np.where(push, 0.5, 0.0)
        return q, q / 4.0
    return strategy


def _validate_round(q: np.ndarray, qbar: np.ndarray, round_index: int) -> None:
    bad = (q < 0) | (q > 0.5) | (qbar < q / 4.0) | (qbar > 1.0 - q)
    if np.any(bad):
        j = int(np.argmax(bad))
        raise InvalidStrategy(
            f"round {round_index}: (q={float(q[j])}, qbar={float(qbar[j])}) "
            "violates 0 <= q <= 1/2, q/4 <= qbar <= 1 - q")


def simulate_episode(config: GameConfig, rng: np.random.Generator,
                     ) -> GameEpisode:
    """Single-episode reference simulation, materializing X and Z."""
    xs: list[int] = []
    zs: list[int] = []
    score = 0
    alive = True
    for i in range(config.rounds):
        q, qbar = config.strategy(i, np.array([score]), np.array([alive]))
        q = np.asarray(q, dtype=np.float64).reshape(-1)[:1]
        qbar = np.asarray(qbar, dtype=np.float64).reshape(-1)[:1]
        _validate_round(q, qbar, i)
        u = rng.random()
        x = 1 if u < q[0] else (2 if u < q[0] + qbar[0] else 0)
        alive = alive and x != 2
        z = int(alive)
        score += z * int(x == 1)
        xs.append(x)
        zs.append(z)
    return GameEpisode(x=tuple(xs), z=tuple(zs), score=score)


@dataclass(frozen=True)
class GameTailRow:
    gamma: float
    exceed_count: int
    estimate: float
    ci_low: float
    ci_high: float
    claimed_bound: float

    @property
    def ok(self) -> bool:
        return self.ci_high <= self.claimed_bound


@dataclass(frozen=True)
class GameReport:
    episodes: int
    rounds: int
    scores: tuple[int, ...]
    tails: tuple[GameTailRow, ...]
    mean_score: float

    @property
    def ok(self) -> bool:
        return all(row.ok for row in self.tails)


def adversary_game_simulator(config: GameConfig, episodes: int,
                             rng: np.random.Generator,
                             gammas: Sequence[float] = (35.0, 50.0, 70.0),
                             confidence: float = DEFAULT_CONFIDENCE,
                             ) -> GameReport:
    """Vectorized simulation of many episodes; one strategy call per round
    receives the per-episode scores and alive flags."""
    if episodes < 1:
        raise InvalidParams("episodes must be >= 1")
    scores = np.zeros(episodes, dtype=np.int64)
    alive = np.ones(episodes, dtype=bool)
    for i in range(config.rounds):
        q, qbar = config.strategy(i, scores, alive)
        q = np.broadcast_to(np.asarray(q, dtype=np.float64),
                            (episodes,)).copy()
        qbar = np.broadcast_to(np.asarray(qbar, dtype=np.float64),
                               (episodes,)).copy()
        _validate_round(q, qbar, i)
        u = rng.random(episodes)
        ones = u < q
        twos = (~ones) & (u < q + qbar)
        scores += (ones & alive).astype(np.int64)
        alive &= ~twos
    tails = []
    for gamma in gammas:
        exceed = int(np.count_nonzero(scores > gamma))
        lo, hi = clopper_pearson(exceed, episodes, confidence)
        tails.append(GameTailRow(
            gamma=float(gamma), exceed_count=exceed,
            estimate=exceed / episodes, ci_low=lo, ci_high=hi,
            claimed_bound=game_tail_bound(gamma)))
    return GameReport(episodes=episodes, rounds=config.rounds,
                      scores=tuple(int(s) for s in scores),
                      tails=tuple(tails), mean_score=float(scores.mean()))


def expected_constant_game_score(q: float, qbar: float, rounds: int) -> float:
    """Closed form for a constant strategy: sum over rounds of q times the
    survival probability (1 - qbar)^(i-1), a geometric sum."""
    if qbar == 0:
        return q * rounds
    return q * (1.0 - (1.0 - qbar) ** rounds) / qbar


# ---------------------------------------------------------------------------
# Exact one-dimensional output distribution and divergence audits.


@dataclass(frozen=True)
class ExactMarginal:
    pmf: np.ndarray
    truncation_bound: float
    block_weights: tuple[float, ...]

    def __post_init__(self):
        self.pmf.setflags(write=False)


def exact_rand_margins_distribution_1d(positives: Dataset,
                                       params: RandMarginsParams,
                                       ) -> ExactMarginal:
    """Exact law of the single cut for d = 1 with the exponential-mechanism
    solver: a mixture over the clamped integer block size, whose weights are
    the ceil-shifted Laplace pmf with the clamp tails folded into the
    endpoints. The mixture is finite, so the truncation bound is zero.
    """
    domain = positives.domain
    if domain.d != 1:
        raise InvalidParams("exact distribution supports d = 1 only")
    if domain.x_max != params.ipp.domain_max:
        raise InvalidParams("dataset domain does not match ipp params")
    solver = ExpMechInteriorPoint()
    if params.inner_size < solver.sample_complexity(params.ipp):
        raise InvalidParams(
            "inner_size is below the solver's sample complexity; this law "
            "would not correspond to a runnable configuration")
    n = len(positives)
    inner = params.inner_size
    if n < inner:
        raise InsufficientData(f"{n} points but inner_size={inner}")
    mu = params.block_mean
    scale = params.noise_scale
    sorted_vals = np.sort(positives.coords[:, 0])

    ks = np.arange(inner, n + 1)
    if ks.size == 1:
        # a single admissible size absorbs the whole law
        weights = np.array([1.0])
    else:
        weights = ceil_shifted_laplace_pmf(mu, scale, ks).astype(np.float64)
        # clamp folds both tails onto the endpoints
        weights[0] = ceil_shifted_laplace_cdf(mu, scale, inner)
        weights[-1] = 1.0 - ceil_shifted_laplace_cdf(mu, scale, n - 1)

    pmf = np.zeros(domain.x_max + 1, dtype=np.float64)
    for k, w in zip(ks, weights):
        if w == 0.0:
            continue
        block_low = sorted_vals[n - k:n - k + inner]
        pmf += w * solver.exact_output_distribution(block_low, params.ipp)
    return ExactMarginal(pmf=pmf, truncation_bound=0.0,
                         block_weights=tuple(float(w) for w in weights))


def hockey_stick_divergence(p, q, epsilon: float) -> float:
    """sum_v max(0, p(v) - e^epsilon q(v)): the smallest delta for which
    (epsilon, delta)-indistinguishability holds in this direction."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise InvalidParams("pmfs must share a common support enumeration")
    return float(np.clip(p - math.exp(epsilon) * q, 0.0, None).sum())


# ---------------------------------------------------------------------------
# Monte-Carlo privacy lower bound for dimensions where exact enumeration is
# out of reach. Events are per-axis thresholds {output_i <= t}; a fallback
# output is encoded as -1 on every axis so threshold events stay well
# defined.

Mechanism = Callable[[Dataset, int], np.ndarray]


@dataclass(frozen=True)
class EventEstimate:
    axis: int
    threshold: int
    direction: str
    numerator_low: float
    denominator_high: float
    epsilon_lower_bound: float


@dataclass(frozen=True)
class McPrivacyReport:
    trials: int
    epsilon_hat: float
    epsilon_budget: float
    delta_budget: float
    best_event: Optional[EventEstimate]
    events_checked: int

    @property
    def violation(self) -> bool:
        return self.epsilon_hat > self.epsilon_budget


def monte_carlo_privacy_lower_bound(mechanism: Mechanism,
                                    pair: NeighboringPair, trials: int,
                                    epsilon_budget: float,
                                    delta_budget: float, *,
                                    master_seed: int = 0,
                                    thresholds_per_axis: int = 16,
                                    confidence: float = DEFAULT_CONFIDENCE,
                                    ) -> McPrivacyReport:
    """Estimate ln(Pr[M(S') in F] / Pr[M(S) in F]) over threshold events with
    Clopper-Pearson corrections and report the best lower confidence bound.

    The numerator is reduced by delta_budget before taking the ratio, so a
    flagged violation is a violation of the claimed (epsilon, delta) budget,
    not just of pure DP.
    """

    if trials < 100:
        raise InvalidParams("need at least 100 trials per side")
    base = pair.base
    extended = pair.extended()
    d = base.domain.d
    outs = np.empty((trials, d), dtype=np.int64)
    outs_prime = np.empty((trials, d), dtype=np.int64)
    for t in range(trials):
        outs[t] = mechanism(base, derive_trial_seed(master_seed, 2 * t))
        outs_prime[t] = mechanism(extended,
                                  derive_trial_seed(master_seed, 2 * t + 1))

    best: Optional[EventEstimate] = None
    eps_hat = -math.inf
    checked = 0
    for axis in range(d):
        pooled = np.unique(np.concatenate([outs[:, axis],
                                           outs_prime[:, axis]]))
        if pooled.size > thresholds_per_axis:
            qs = np.linspace(0.0, 1.0, thresholds_per_axis)
            pooled = np.unique(np.quantile(pooled, qs).astype(np.int64))
        for t in pooled:
            k = int(np.count_nonzero(outs[:, axis] <= t))
            k_prime = int(np.count_nonzero(outs_prime[:, axis] <= t))
            for direction, num, den in (("prime_over_base", k_prime, k),
                                        ("base_over_prime", k, k_prime)):
                checked += 1
                num_low, _ = clopper_pearson(num, trials, confidence)
                _, den_high = clopper_pearson(den, trials, confidence)
                adjusted = num_low - delta_budget
                if adjusted <= 0 or den_high <= 0:
                    continue
                bound = math.log(adjusted / den_high)
                if bound > eps_hat:
                    eps_hat = bound
                    best = EventEstimate(
                        axis=axis, threshold=int(t), direction=direction,
                        numerator_low=num_low, denominator_high=den_high,
                        epsilon_lower_bound=bound)
    if eps_hat == -math.inf:
        eps_hat = 0.0
    return McPrivacyReport(trials=trials, epsilon_hat=eps_hat,
                           epsilon_budget=epsilon_budget,
                           delta_budget=delta_budget, best_event=best,
                           events_checked=checked)


def rand_margins_mechanism(params: RandMarginsParams, solver) -> Mechanism:
    """Mechanism adapter for the Monte-Carlo auditor: returns the corner, or
    all -1 when the run aborts for lack of points."""
    def mech(dataset: Dataset, seed: int) -> np.ndarray:
        run_params = replace(params, seed=seed)
        try:
            corner, _ = rand_margins(dataset, run_params, solver,
                                     trace_detail="light")
        except InsufficientData:
            return np.full(dataset.domain.d, -1, dtype=np.int64)
        return np.asarray(corner.corner, dtype=np.int64)
    return mech
