"""The per-axis deletion learner, its PAC wrapper, the composition baseline,
and the two instructive broken variants.

The main algorithm processes axes in order. On each axis it draws Laplace
noise, takes a noisy-sized block of the largest remaining points, hands the
``inner_size`` smallest points of that block to an interior point solver,
and deletes every remaining point at or above the returned cut. Because a
single added point can only influence the solver input on the few axes where
it lands inside the noisy block before being deleted, the privacy cost does
not scale with the number of axes the way naive composition would force.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientData, InvalidParams
from .ipp import IppParams, IppSolver, solve_interior_point
from .model import (Dataset, EmptyRectangle, Hypothesis, OriginRectangle,
                    dataset_sha)
from .noise import LaplaceSpec, sample_laplace
from .seeding import iteration_rng

# read off the proof structure: at most 35*ln(1/delta) paying iterations,
# each contributing 2*epsilon of privacy loss
END_TO_END_EPSILON_FACTOR = 70.0

# rng roles; every (seed, iteration, role) triple is an independent stream,
# so paired executions stay aligned even when one run consumes more draws
ROLE_NOISE = 0
ROLE_IPP = 1
ROLE_IPP_HIGH = 2

TRACE_FIELDS = (
    "axis", "noise", "raw_size", "clamped_size", "clamp_event", "block_size",
    "inner_count", "block_ids", "inner_ids", "inner_low", "inner_high",
    "cut", "removed_count", "boundary_removed_count", "survivors_after",
    "solver_in_range",
)


@dataclass(frozen=True)
class PrivacyBudget:
    """Per-call budget and the derived end-to-end budget of a full run."""

    epsilon: float
    delta: float
    d: int

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidParams("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise InvalidParams("delta must be in (0, 1)")
        if self.d < 1:
            raise InvalidParams("d must be >= 1")

    @property
    def epsilon_total(self) -> float:
        return END_TO_END_EPSILON_FACTOR * self.epsilon * math.log(
            1.0 / self.delta)

    @property
    def delta_total(self) -> float:
        return (self.d + 2) * self.delta


@dataclass(frozen=True)
class RandMarginsParams:
    """Run parameters: solver budget, inner block size, and the run seed.

    ``inner_size`` is the number of points handed to the interior point
    solver on each axis and must equal the solver's sample complexity for
    the chosen budget (use ``from_solver``). The mean of the noisy outer
    block is derived as 4 * inner_size * ln(1/beta).
    """

    ipp: IppParams
    inner_size: int
    seed: int

    def __post_init__(self):
        if self.inner_size < 1:
            raise InvalidParams(
                f"inner_size must be >= 1, got {self.inner_size}")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidParams("seed must be a 64-bit unsigned integer")

    @property
    def block_mean(self) -> float:
        return 4.0 * self.inner_size * math.log(1.0 / self.ipp.beta)

    @property
    def noise_scale(self) -> float:
        return 2.0 * self.inner_size

    @classmethod
    def from_solver(cls, ipp: IppParams, solver: IppSolver,
                    seed: int) -> "RandMarginsParams":
        return cls(ipp=ipp, inner_size=solver.sample_complexity(ipp),
                   seed=seed)


@dataclass(frozen=True)
class IterationTrace:
    """Everything one axis iteration did, in enough detail to audit it."""

    axis: int
    noise: float
    raw_size: int
    clamped_size: int
    clamp_event: bool
    block_ids: Optional[tuple[int, ...]]
    inner_ids: Optional[tuple[int, ...]]
    inner_low: int
    inner_high: int
    cut: int
    removed_count: int
    boundary_removed_count: int
    survivors_after: int
    solver_in_range: bool
    tracked_alive_before: Optional[bool] = None
    tracked_in_block: Optional[bool] = None
    tracked_in_inner: Optional[bool] = None
    tracked_removed: Optional[bool] = None

    @property
    def block_size(self) -> int:
        return self.clamped_size

    def to_json_dict(self) -> dict:
        return {
            "axis": self.axis,
            "noise": self.noise,
            "raw_size": self.raw_size,
            "clamped_size": self.clamped_size,
            "clamp_event": self.clamp_event,
            "block_size": self.block_size,
            "inner_count": None if self.inner_ids is None else len(self.inner_ids),
            "block_ids": None if self.block_ids is None else list(self.block_ids),
            "inner_ids": None if self.inner_ids is None else list(self.inner_ids),
            "inner_low": self.inner_low,
            "inner_high": self.inner_high,
            "cut": self.cut,
            "removed_count": self.removed_count,
            "boundary_removed_count": self.boundary_removed_count,
            "survivors_after": self.survivors_after,
            "solver_in_range": self.solver_in_range,
        }


@dataclass(frozen=True)
class RunTrace:
    iterations: tuple[IterationTrace, ...]
    corner: tuple[int, ...]
    seed: int
    inner_size: int
    ipp: IppParams
    solver_name: str
    input_sha: str
    n_input: int
    track_id: Optional[int] = None

    @property
    def removed_total(self) -> int:
        return sum(it.removed_count for it in self.iterations)

    @property
    def max_clamped_size(self) -> int:
        return max((it.clamped_size for it in self.iterations), default=0)

    @property
    def clamp_events(self) -> int:
        return sum(it.clamp_event for it in self.iterations)

    @property
    def solver_failures(self) -> int:
        return sum(not it.solver_in_range for it in self.iterations)

    def same_run_setup(self, other: "RunTrace") -> bool:
        """True when two traces came from paired executions (same seed and
        parameters; the datasets are allowed to differ)."""
        return (self.seed == other.seed
                and self.inner_size == other.inner_size
                and self.ipp == other.ipp
                and self.solver_name == other.solver_name)


def write_trace_jsonl(trace: RunTrace, path) -> None:
    """One iteration per line, fields in a fixed order."""
    with open(path, "w") as fh:
        for it in trace.iterations:
            fh.write(json.dumps(it.to_json_dict()) + "\n")


def _top_ids(ids: np.ndarray, keys: np.ndarray, k: int) -> np.ndarray:
    if k >= ids.size:
        return ids
    sel = np.argpartition(keys, ids.size - k)[ids.size - k:]
    return ids[sel]


def _bottom_ids(ids: np.ndarray, keys: np.ndarray, k: int) -> np.ndarray:
    if k >= ids.size:
        return ids
    sel = np.argpartition(keys, k)[:k]
    return ids[sel]


def rand_margins(positives: Dataset, params: RandMarginsParams,
                 solver: IppSolver, *, trace_detail: str = "full",
                 track: Optional[int] = None,
                 noise_override: Optional[Sequence[float]] = None,
                 ) -> tuple[OriginRectangle, RunTrace]:
    """Run the per-axis deletion learner on a dataset of positive points.

    Labels of ``positives`` are ignored; callers filter beforehand. For each
    axis i in order: draw w ~ Laplace(2 * inner_size); set
    k = clamp(ceil(block_mean + w), inner_size, survivors); take the k
    largest survivors along axis i; hand the inner_size smallest of those to
    the solver; delete every survivor whose coordinate is >= the returned
    cut. Out-of-range noisy sizes are clamped, never silently: the trace
    records every clamp event.

    ``track`` names a row whose block membership should be recorded per
    iteration (used by the privacy audits). ``noise_override`` replaces the
    Laplace draws with fixed values, for reference simulations.

    Raises InsufficientData when fewer than ``inner_size`` survivors remain
    at the start of an iteration.
    """
    domain = positives.domain
    if domain.x_max != params.ipp.domain_max:
        raise InvalidParams(
            f"dataset domain x_max={domain.x_max} does not match "
            f"ipp domain_max={params.ipp.domain_max}")
    if trace_detail not in ("full", "light"):
        raise InvalidParams(f"unknown trace_detail {trace_detail!r}")
    need = solver.sample_complexity(params.ipp)
    if params.inner_size < need:
        raise InvalidParams(
            f"inner_size={params.inner_size} is below the solver's sample "
            f"complexity {need} for these parameters")
    n = len(positives)
    d = domain.d
    if noise_override is not None and len(noise_override) != d:
        raise InvalidParams("noise_override must provide one value per axis")
    if track is not None and not 0 <= track < n:
        raise InvalidParams(f"track index {track} out of range")

    inner = params.inner_size
    mu = params.block_mean
    spec = LaplaceSpec(0.0, params.noise_scale)
    coords = positives.coords
    live = np.arange(n, dtype=np.int64)  # surviving row ids, kept ascending
    full = trace_detail == "full"

    cuts: list[int] = []
    iterations: list[IterationTrace] = []
    for i in range(d):
        if live.size < inner:
            raise InsufficientData(
                f"axis {i}: {live.size} survivors but inner_size={inner}")
        if noise_override is not None:
            w = float(noise_override[i])
        else:
            w = sample_laplace(spec, iteration_rng(params.seed, i, ROLE_NOISE))
        raw = math.ceil(mu + w)
        k = min(max(raw, inner), live.size)
        clamped = k != raw

        vals = coords[live, i]
        # strict total order (value, insertion index) packed into one key
        keys = vals * np.int64(n + 1) + live
        if k < live.size:
            sel = np.argpartition(keys, live.size - k)[live.size - k:]
            block = live[sel]
            block_keys = keys[sel]
        else:
            block = live
            block_keys = keys
        if inner < block.size:
            isel = np.argpartition(block_keys, inner)[:inner]
            inner_ids = block[isel]
        else:
            inner_ids = block
        inner_vals = coords[inner_ids, i]
        lo = int(inner_vals.min())
        hi = int(inner_vals.max())

        cut = solve_interior_point(solver, inner_vals, params.ipp,
                                   iteration_rng(params.seed, i, ROLE_IPP))
        keep = vals < cut
        removed_count = live.size - int(np.count_nonzero(keep))
        boundary = int(np.count_nonzero(vals == cut))

        tracked_alive = tracked_in_block = tracked_in_inner = None
        tracked_removed = None
        if track is not None:
            pos = int(np.searchsorted(live, track))
            tracked_alive = pos < live.size and int(live[pos]) == track
            tracked_in_block = bool(np.any(block == track))
            tracked_in_inner = bool(np.any(inner_ids == track))
            tracked_removed = tracked_alive and int(coords[track, i]) >= cut

        live = live[keep]
        cuts.append(cut)
        iterations.append(IterationTrace(
            axis=i,
            noise=w,
            raw_size=raw,
            clamped_size=k,
            clamp_event=clamped,
            block_ids=tuple(int(x) for x in np.sort(block)) if full else None,
            inner_ids=tuple(int(x) for x in np.sort(inner_ids)) if full else None,
            inner_low=lo,
            inner_high=hi,
            cut=cut,
            removed_count=removed_count,
            boundary_removed_count=boundary,
            survivors_after=int(live.size),
            solver_in_range=lo <= cut <= hi,
            tracked_alive_before=tracked_alive,
            tracked_in_block=tracked_in_block,
            tracked_in_inner=tracked_in_inner,
            tracked_removed=tracked_removed,
        ))

    corner = OriginRectangle(tuple(cuts))
    trace = RunTrace(
        iterations=tuple(iterations),
        corner=corner.corner,
        seed=params.seed,
        inner_size=inner,
        ipp=params.ipp,
        solver_name=solver.name,
        input_sha=dataset_sha(positives),
        n_input=n,
        track_id=track,
    )
    return corner, trace


def fallback_threshold(params: RandMarginsParams) -> int:
    """Positive count below which the learner returns the all-zero fallback.

    Below inner_size + ceil(6 * inner_size * ln(1/beta)) the very first
    block cannot reach its intended size in the regime the utility argument
    needs.
    """
    return params.inner_size + math.ceil(
        6.0 * params.inner_size * math.log(1.0 / params.ipp.beta))


def learn_rectangle(dataset: Dataset, params: RandMarginsParams,
                    solver: IppSolver, *, fallback: bool = True,
                    trace_detail: str = "light") -> Hypothesis:
    """PAC wrapper: filter positives, learn, fall back to all-zero if starved.

    With ``fallback=False`` an InsufficientData error propagates instead of
    being converted into the EmptyRectangle hypothesis.
    """
    pos = dataset.positives()
    if len(pos) < fallback_threshold(params):
        if fallback:
            return EmptyRectangle()
        raise InsufficientData(
            f"{len(pos)} positives, below the working threshold "
            f"{fallback_threshold(params)}")
    try:
        corner, _ = rand_margins(pos, params, solver,
                                 trace_detail=trace_detail)
    except InsufficientData:
        if fallback:
            return EmptyRectangle()
        raise
    return corner


def required_sample_size(alpha: float, d: int, ipp: IppParams,
                         solver: IppSolver, *, pac_constant: float = 12.0,
                         vc_constant: float = 8.0) -> int:
    """Labeled sample size for (alpha, beta)-PAC learning with this solver.

    Per-axis cost pac_constant * n_solver * (1/alpha) * ln(e/alpha) *
    ln(e/beta), multiplied by d, floored by the VC generalization
    requirement vc_constant * (1/alpha) * (2d ln(1/alpha) + ln(1/beta)).
    The constants are calibration choices validated by the acceptance suite
    and adjustable here.
    """
    if not 0 < alpha < 1:
        raise InvalidParams(f"alpha must be in (0, 1), got {alpha}")
    if d < 1:
        raise InvalidParams(f"d must be >= 1, got {d}")
    beta = ipp.beta
    n_solver = solver.sample_complexity(ipp)
    per_axis = math.ceil(pac_constant * n_solver * (1.0 / alpha)
                         * math.log(math.e / alpha)
                         * math.log(math.e / beta))
    vc_floor = math.ceil(vc_constant * (1.0 / alpha)
                         * (2.0 * d * math.log(1.0 / alpha)
                            + math.log(1.0 / beta)))
    return max(d * per_axis, vc_floor)


# ---------------------------------------------------------------------------
# Composition baseline: two interior point calls per axis at a budget shrunk
# for advanced composition, no deletion.


def composition_call_budget(epsilon: float, delta: float,
                            d: int) -> tuple[float, float]:
    """Per-call (epsilon', delta') so that 2d adaptive calls compose to
    roughly (epsilon, delta) under advanced composition: epsilon' =
    epsilon / (2 sqrt(4 d ln(1/delta))), delta' = delta / (4 d)."""
    if not 0 < delta < 1:
        raise InvalidParams("delta must be in (0, 1) for composition")
    eps_call = epsilon / (2.0 * math.sqrt(4.0 * d * math.log(1.0 / delta)))
    delta_call = delta / (4.0 * d)
    return eps_call, delta_call


@dataclass(frozen=True)
class BaselineResult:
    """Extended output of the composition baseline.

    ``low``/``high`` are the per-axis interior points of the smallest and
    largest blocks; for comparisons against origin-placed learners the
    hypothesis uses the high corner.
    """

    low: tuple[int, ...]
    high: tuple[int, ...]
    eps_per_call: float
    delta_per_call: float
    block_size: int
    calls: int

    @property
    def hypothesis(self) -> OriginRectangle:
        return OriginRectangle(self.high)


def baseline_composition_learner(dataset: Dataset, epsilon: float,
                                 delta: float, beta: float,
                                 solver: IppSolver, *, seed: int,
                                 ) -> BaselineResult:
    """Per-axis interval estimation with advanced-composition accounting.

    Every axis runs the solver on the lowest and highest ``n`` projected
    positives where n is the solver's sample complexity at the reduced
    per-call budget, so the per-call block grows like sqrt(d).
    """
    domain = dataset.domain
    eps_call, delta_call = composition_call_budget(epsilon, delta, domain.d)
    call_params = IppParams(epsilon=eps_call, delta=delta_call, beta=beta,
                            domain_max=domain.x_max)
    n_call = solver.sample_complexity(call_params)
    pos = dataset.positives()
    if len(pos) < n_call:
        raise InsufficientData(
            f"{len(pos)} positives but the reduced budget needs {n_call} "
            f"per call")
    coords = pos.coords
    n = len(pos)
    ids = np.arange(n, dtype=np.int64)
    low: list[int] = []
    high: list[int] = []
    for i in range(domain.d):
        keys = coords[:, i] * np.int64(n + 1) + ids
        low_ids = _bottom_ids(ids, keys, n_call)
        high_ids = _top_ids(ids, keys, n_call)
        a = solve_interior_point(solver, coords[low_ids, i], call_params,
                                 iteration_rng(seed, i, ROLE_IPP))
        b = solve_interior_point(solver, coords[high_ids, i], call_params,
                                 iteration_rng(seed, i, ROLE_IPP_HIGH))
        low.append(a)
        high.append(b)
    return BaselineResult(low=tuple(low), high=tuple(high),
                          eps_per_call=eps_call, delta_per_call=delta_call,
                          block_size=n_call, calls=2 * domain.d)


# ---------------------------------------------------------------------------
# The two instructive broken variants: fixed-size blocks with deletion, and
# noisy-size blocks that delete the whole block. Both are kept only to
# demonstrate why the deletion rule of the main algorithm matters.

VARIANT_FIXED = "failed_1"
VARIANT_NOISY = "failed_2"
_VARIANTS = (VARIANT_FIXED, VARIANT_NOISY)


@dataclass(frozen=True)
class VariantIteration:
    axis: int
    size_low: int
    size_high: int
    low_ids: tuple[int, ...]
    high_ids: tuple[int, ...]
    a: int
    b: int


@dataclass(frozen=True)
class VariantRun:
    variant: str
    low: tuple[int, ...]
    high: tuple[int, ...]
    iterations: tuple[VariantIteration, ...]
    seed: int
    block_size: int


def run_failed_variant(dataset: Dataset, variant: str, epsilon: float,
                       delta: float, beta: float, solver: IppSolver, *,
                       seed: int,
                       size_override: Optional[Sequence[tuple[int, int]]] = None,
                       ) -> VariantRun:
    """One execution of a broken variant, with full block id traces.

    ``failed_1`` uses fixed blocks of the solver's sample complexity n and
    deletes them after use. ``failed_2`` draws the block sizes as
    ceil(2n + Laplace(2n)) clamped into [n, survivors/2] and also deletes
    the full blocks. ``size_override`` forces (size_low, size_high) per axis
    for the noisy variant, used to demonstrate the size-collision argument.
    """
    if variant not in _VARIANTS:
        raise InvalidParams(f"unknown variant {variant!r}; choose from "
                            f"{_VARIANTS}")
    domain = dataset.domain
    params = IppParams(epsilon=epsilon, delta=delta, beta=beta,
                       domain_max=domain.x_max)
    n_call = solver.sample_complexity(params)
    pos = dataset.positives()
    coords = pos.coords
    n = len(pos)
    row_ids = np.arange(n, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    spec = LaplaceSpec(0.0, 2.0 * n_call)

    low: list[int] = []
    high: list[int] = []
    iterations: list[VariantIteration] = []
    for i in range(domain.d):
        ids = row_ids[alive]
        if ids.size < 2 * n_call:
            raise InsufficientData(
                f"axis {i}: {ids.size} survivors, need {2 * n_call}")
        if variant == VARIANT_FIXED:
            s_low = s_high = n_call
        elif size_override is not None:
            s_low, s_high = size_override[i]
        else:
            noise_rng = iteration_rng(seed, i, ROLE_NOISE)
            s_low = math.ceil(2 * n_call + sample_laplace(spec, noise_rng))
            s_high = math.ceil(2 * n_call + sample_laplace(spec, noise_rng))
        cap = ids.size // 2
        s_low = min(max(int(s_low), n_call), cap)
        s_high = min(max(int(s_high), n_call), cap)

        keys = coords[ids, i] * np.int64(n + 1) + ids
        low_ids = _bottom_ids(ids, keys, s_low)
        high_ids = _top_ids(ids, keys, s_high)
        a = solve_interior_point(solver, coords[low_ids, i], params,
                                 iteration_rng(seed, i, ROLE_IPP))
        b = solve_interior_point(solver, coords[high_ids, i], params,
                                 iteration_rng(seed, i, ROLE_IPP_HIGH))
        alive[low_ids] = False
        alive[high_ids] = False
        low.append(a)
        high.append(b)
        iterations.append(VariantIteration(
            axis=i, size_low=s_low, size_high=s_high,
            low_ids=tuple(int(x) for x in np.sort(low_ids)),
            high_ids=tuple(int(x) for x in np.sort(high_ids)),
            a=a, b=b))
    return VariantRun(variant=variant, low=tuple(low), high=tuple(high),
                      iterations=tuple(iterations), seed=seed,
                      block_size=n_call)


def variant_learner(dataset: Dataset, epsilon: float, delta: float,
                    beta: float, solver: IppSolver, variant: str, *,
                    seed: int) -> tuple[OriginRectangle, VariantRun]:
    """Spec-facing wrapper returning (high-corner hypothesis, full run)."""
    run = run_failed_variant(dataset, variant, epsilon, delta, beta, solver,
                             seed=seed)
    return OriginRectangle(run.high), run


@dataclass(frozen=True)
class DivergenceReport:
    """Paired-run comparison of a broken variant on (S, S + {x'}).

    ``divergent_axes`` lists iterations whose block id sets differ between
    the two executions once the added point itself is discounted; its length
    is the empirical domino length.
    """

    variant: str
    divergent_axes: tuple[int, ...]
    run: VariantRun
    run_prime: VariantRun

    @property
    def domino_length(self) -> int:
        return len(self.divergent_axes)


def variant_divergence(base: Dataset, extra, variant: str, epsilon: float,
                       delta: float, beta: float, solver: IppSolver, *,
                       seed: int) -> DivergenceReport:
    """Run a broken variant on S and on S + {x'} with paired seeds and count
    the iterations whose blocks differ (beyond x' itself)."""
    extended = base.append(extra)
    extra_id = len(base)
    run = run_failed_variant(base, variant, epsilon, delta, beta, solver,
                             seed=seed)
    run_prime = run_failed_variant(extended, variant, epsilon, delta, beta,
                                   solver, seed=seed)
    divergent = []
    for it, it_p in zip(run.iterations, run_prime.iterations):
        blocks = set(it.low_ids) | set(it.high_ids)
        blocks_p = (set(it_p.low_ids) | set(it_p.high_ids)) - {extra_id}
        if blocks != blocks_p:
            divergent.append(it.axis)
    return DivergenceReport(variant=variant, divergent_axes=tuple(divergent),
                            run=run, run_prime=run_prime)
