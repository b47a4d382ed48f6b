"""Monte Carlo engine: fleets of independent searchers against a hidden box.

Trials are step-synchronous: at every global step each live searcher opens
one box.  Searchers never communicate; each one owns a private random stream
derived from (trial seed, searcher id), which makes every trial a
deterministic function of its config and embarrassingly parallel across
trial indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .strategy import (
    BLOCK_RANDOM,
    COORDINATED,
    NESTED,
    SOLO,
    SearchParams,
    StrategyKind,
    rng_chunk_size,
    searcher_seed,
)

PERTURBATION_KINDS = ("identity", "shift", "extra-boxes", "local-shuffle")


def ceil_sqrt(i: int) -> int:
    s = math.isqrt(i)
    return s if s * s == i else s + 1


@dataclass(frozen=True)
class Perturbation:
    """A searcher's private renumbering of the box list.

    ``map_index`` is the injective map from true index to the index the
    searcher sees.  All built-in kinds keep map_index(i)/i -> 1, the regime in
    which the samplers keep their speed-up:

    - identity: i
    - shift: i + c (the first c perceived slots are extra boxes)
    - extra-boxes: i + rate(i) with sublinear rate, default ceil(sqrt(i))
    - local-shuffle: a seeded permutation displacing each index < window
    """

    kind: str = "identity"
    shift: int = 0
    rate: Callable[[int], int] | None = None
    window: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in PERTURBATION_KINDS:
            raise ValueError(
                f"unknown perturbation {self.kind!r}; expected one of {PERTURBATION_KINDS}")
        if self.kind == "shift" and self.shift < 0:
            raise ValueError(f"shift must be >= 0, got {self.shift}")
        if self.kind == "local-shuffle" and self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")

    def map_index(self, i: int) -> int:
        if i < 1:
            raise ValueError(f"box index must be >= 1, got {i}")
        kind = self.kind
        if kind == "identity":
            return i
        if kind == "shift":
            return i + self.shift
        if kind == "extra-boxes":
            extra = int((self.rate or ceil_sqrt)(i))
            if extra < 0:
                raise ValueError(f"rate({i}) must be >= 0, got {extra}")
            return i + extra
        blk = (i - 1) // self.window
        rng = np.random.default_rng(np.random.SeedSequence(entropy=self.seed, spawn_key=(blk,)))
        perm = rng.permutation(self.window)
        return blk * self.window + int(perm[i - 1 - blk * self.window]) + 1

    def describe(self) -> str:
        if self.kind == "shift":
            return f"shift:{self.shift}"
        if self.kind == "extra-boxes":
            return "extra-boxes:ceil-sqrt" if self.rate is None else "extra-boxes:custom"
        if self.kind == "local-shuffle":
            return f"local-shuffle:{self.window}:seed={self.seed}"
        return "identity"


@dataclass(frozen=True)
class CrashSchedule:
    """Oblivious crash times: a crashed searcher makes no peeks at t >= crash."""

    entries: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        seen = set()
        for sid, when in self.entries:
            if sid < 1:
                raise ValueError(f"searcher id must be >= 1, got {sid}")
            if when < 1:
                raise ValueError(f"crash time must be >= 1, got {when}")
            if sid in seen:
                raise ValueError(f"duplicate crash entry for searcher {sid}")
            seen.add(sid)

    def crash_time(self, sid: int) -> int | None:
        for s, when in self.entries:
            if s == sid:
                return when
        return None


@dataclass(frozen=True)
class TrialConfig:
    """One trial: who searches, where the treasure is, and the trial seed."""

    params: SearchParams
    kind: StrategyKind
    treasure: int
    seed: int
    step_cap: int = 0  # 0 selects the default 50 * treasure * (k+1)
    crashes: CrashSchedule = field(default_factory=CrashSchedule)
    perturbations: tuple[Perturbation, ...] = ()
    searchers: int = 0  # 0 selects params.k

    def __post_init__(self) -> None:
        if self.treasure < 1:
            raise ValueError(f"treasure index must be >= 1, got {self.treasure}")
        if self.step_cap < 0:
            raise ValueError(f"step_cap must be >= 1 (or 0 for the default), got {self.step_cap}")
        n = self.fleet_size
        if n < 1:
            raise ValueError(f"fleet size must be >= 1, got {n}")
        if self.perturbations and len(self.perturbations) != n:
            raise ValueError(
                f"perturbations must be empty or one per searcher ({n}), "
                f"got {len(self.perturbations)}")
        for sid, _ in self.crashes.entries:
            if sid > n:
                raise ValueError(f"crash entry for searcher {sid} outside 1..{n}")

    @property
    def fleet_size(self) -> int:
        return self.searchers if self.searchers else self.params.k

    @property
    def effective_step_cap(self) -> int:
        if self.step_cap:
            return self.step_cap
        return 50 * self.treasure * self.params.block_size


@dataclass(frozen=True)
class TrialOutcome:
    """Discovery step and finder; time None means the cap was hit (not an error)."""

    time: int | None
    first_finder: int | None

    @property
    def discovered(self) -> bool:
        return self.time is not None


def _nested_steps_py(width: int, target: int, u, cand: list[int], st: list[int],
                     limit: int) -> int:
    """Reference stepper for the nested sampler, one uniform per step.

    Mirrors strategy.next_box_nested exactly: the pool grows by ``width``
    boxes on every odd step and draws are swap-popped from the candidate
    list, so a given seed yields the identical peek sequence.  Consumes the
    uniforms in ``u``; returns the hit step, 0 when the uniforms ran out, or
    -1 when ``limit`` was reached.  ``st`` carries (t, hi) across calls.
    """
    t, hi = st
    pop = cand.pop
    extend = cand.extend
    for x in u:
        if t >= limit:
            st[0], st[1] = t, hi
            return -1
        t += 1
        if t & 1:
            extend(range(hi + 1, hi + width + 1))
            hi += width
        m = len(cand)
        j = int(x * m)
        box = cand[j]
        last = pop()
        if j < m - 1:
            cand[j] = last
        if box == target:
            st[0], st[1] = t, hi
            return t
    st[0], st[1] = t, hi
    return 0


def _block_steps_py(block_len: int, target: int, u, cand: list[int], st: list[int],
                    limit: int) -> int:
    """Reference stepper for the block sampler; same contract as above."""
    t, hi = st
    pop = cand.pop
    extend = cand.extend
    for x in u:
        if t >= limit:
            st[0], st[1] = t, hi
            return -1
        t += 1
        if not cand:
            extend(range(hi + 1, hi + block_len + 1))
            hi += block_len
        m = len(cand)
        j = int(x * m)
        box = cand[j]
        last = pop()
        if j < m - 1:
            cand[j] = last
        if box == target:
            st[0], st[1] = t, hi
            return t
    st[0], st[1] = t, hi
    return 0


def _hit_time_py(stepper, grow: int, target: int, seed_seq, limit: int) -> int | None:
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    cand: list[int] = []
    st = [0, 0]
    chunk = 0
    while True:
        u = rng.random(rng_chunk_size(chunk)).tolist()
        chunk += 1
        r = stepper(grow, target, u, cand, st, limit)
        if r > 0:
            return r
        if r < 0:
            return None


try:  # compiled steppers; the pure-Python ones above stay the reference
    from numba import njit as _njit

    @_njit(cache=True)
    def _nested_steps_nb(width, target, u, cand, st, limit):  # pragma: no cover
        t = st[0]
        m = st[1]
        hi = st[2]
        for idx in range(u.shape[0]):
            if t >= limit:
                st[0], st[1], st[2] = t, m, hi
                return -1
            t += 1
            if t & 1:
                for b in range(hi + 1, hi + width + 1):
                    cand[m] = b
                    m += 1
                hi += width
            j = int(u[idx] * m)
            box = cand[j]
            m -= 1
            cand[j] = cand[m]
            if box == target:
                st[0], st[1], st[2] = t, m, hi
                return t
        st[0], st[1], st[2] = t, m, hi
        return 0

    @_njit(cache=True)
    def _block_steps_nb(block_len, target, u, cand, st, limit):  # pragma: no cover
        t = st[0]
        m = st[1]
        hi = st[2]
        for idx in range(u.shape[0]):
            if t >= limit:
                st[0], st[1], st[2] = t, m, hi
                return -1
            t += 1
            if m == 0:
                for b in range(hi + 1, hi + block_len + 1):
                    cand[m] = b
                    m += 1
                hi += block_len
            j = int(u[idx] * m)
            box = cand[j]
            m -= 1
            cand[j] = cand[m]
            if box == target:
                st[0], st[1], st[2] = t, m, hi
                return t
        st[0], st[1], st[2] = t, m, hi
        return 0

    HAVE_COMPILED_STEPPERS = True
except ImportError:  # pragma: no cover
    HAVE_COMPILED_STEPPERS = False

USE_COMPILED_STEPPERS = HAVE_COMPILED_STEPPERS


def _hit_time_nb(stepper, grow: int, target: int, seed_seq, limit: int,
                 pool_cap: int) -> int | None:
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    cand = np.empty(pool_cap, np.int64)
    st = np.zeros(3, np.int64)
    chunk = 0
    while True:
        u = rng.random(rng_chunk_size(chunk))
        chunk += 1
        r = stepper(grow, target, u, cand, st, limit)
        if r > 0:
            return int(r)
        if r < 0:
            return None


def _nested_hit_time(width: int, target: int, seed_seq, limit: int) -> int | None:
    """First step <= limit at which the nested sampler draws ``target``."""
    if USE_COMPILED_STEPPERS:
        pool_cap = ((limit + 1) // 2 + 1) * width
        return _hit_time_nb(_nested_steps_nb, width, target, seed_seq, limit, pool_cap)
    return _hit_time_py(_nested_steps_py, width, target, seed_seq, limit)


def _block_hit_time(block_len: int, target: int, seed_seq, limit: int) -> int | None:
    """First step <= limit at which the block sampler draws ``target``."""
    if USE_COMPILED_STEPPERS:
        return _hit_time_nb(_block_steps_nb, block_len, target, seed_seq, limit,
                            block_len + 1)
    return _hit_time_py(_block_steps_py, block_len, target, seed_seq, limit)


def _hit_time(config: TrialConfig, sid: int, target: int, limit: int) -> int | None:
    name = config.kind.name
    if name == NESTED:
        return _nested_hit_time(config.params.block_size, target,
                                searcher_seed(config.seed, sid), limit)
    if name == BLOCK_RANDOM:
        return _block_hit_time(config.kind.block_len, target,
                               searcher_seed(config.seed, sid), limit)
    if name == SOLO:
        return target if target <= limit else None
    # coordinated partition over the fleet: searcher sid opens sid + (t-1)*n
    n = config.fleet_size
    if (target - sid) % n:
        return None
    t = (target - sid) // n + 1
    return t if 1 <= t <= limit else None


def run_trial(config: TrialConfig) -> TrialOutcome:
    """Simulate one fleet trial; earliest hit wins, lowest id breaks ties.

    Searchers are independent, so each one is run on its own stream only as
    far as it could still improve on the best hit so far; the outcome equals
    a fully step-synchronous simulation.
    """
    cap = config.effective_step_cap
    perts = config.perturbations
    best_t: int | None = None
    finder: int | None = None
    for sid in range(1, config.fleet_size + 1):
        limit = cap
        crash = config.crashes.crash_time(sid)
        if crash is not None and crash - 1 < limit:
            limit = crash - 1
        if best_t is not None and best_t - 1 < limit:
            limit = best_t - 1
        if limit <= 0:
            continue
        target = perts[sid - 1].map_index(config.treasure) if perts else config.treasure
        t = _hit_time(config, sid, target, limit)
        if t is not None:
            best_t = t
            finder = sid
    return TrialOutcome(best_t, finder)


def trial_seed(base_seed: int, index: int) -> int:
    """Per-trial seed derived from the experiment base seed."""
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


class NonDiscoveryError(RuntimeError):
    """Raised when a mean is requested but some trials hit the step cap."""


@dataclass(frozen=True)
class RunStats:
    """Aggregate over independent trials.

    ``mean_time``/``stderr`` cover discovering trials only; trials that hit
    the step cap are counted in ``non_discovery_count``, never dropped
    silently.  The 95% interval uses the normal approximation.
    """

    trials: int
    mean_time: float
    stderr: float
    speedup_point: float
    ci95: tuple[float, float]
    non_discovery_count: int


def estimate_speedup(template: TrialConfig, trials: int,
                     allow_non_discovery: bool = False) -> RunStats:
    """Run ``trials`` independent seeded trials of ``template``.

    ``template.seed`` acts as the experiment base seed; trial i runs with
    trial_seed(base, i).  Aggregation uses exact integer moments, so results
    do not depend on reduction order.
    """
    if trials < 2:
        raise ValueError(f"need at least 2 trials, got {trials}")
    base = template.seed
    x = template.treasure
    total = 0
    total_sq = 0
    found = 0
    missing = 0
    for i in range(trials):
        outcome = run_trial(replace(template, seed=trial_seed(base, i)))
        if outcome.time is None:
            missing += 1
        else:
            total += outcome.time
            total_sq += outcome.time * outcome.time
            found += 1
    if missing and not allow_non_discovery:
        raise NonDiscoveryError(
            f"{missing} of {trials} trials hit the step cap; no mean reported")
    if not found:
        return RunStats(trials, math.nan, math.nan, math.nan, (math.nan, math.nan), missing)
    mean = total / found
    if found > 1:
        var = max(0.0, (total_sq - total * total / found) / (found - 1))
        stderr = math.sqrt(var / found)
    else:
        stderr = math.nan
    half = 1.96 * stderr
    return RunStats(trials, mean, stderr, x / mean, (mean - half, mean + half), missing)


def cis_overlap(a: RunStats, b: RunStats) -> bool:
    return a.ci95[0] <= b.ci95[1] and b.ci95[0] <= a.ci95[1]


@dataclass(frozen=True)
class CrashReport:
    k: int
    k_prime: int
    x: int
    trials: int
    with_crashes: RunStats
    control: RunStats
    overlap: bool


def crash_experiment(k: int, k_prime: int, x: int, trials: int, base_seed: int,
                     step_cap: int = 0) -> CrashReport:
    """Crashed oversized fleet vs the right-sized fleet it degrades to.

    A fleet of k searchers runs the sampler designed for k - k' searchers,
    with searchers 1..k' crashed at time 1; the control is k - k' searchers,
    uncrashed, same design.  The two means must agree (the crashed searchers
    never contribute), which the overlap of the 95% intervals checks.
    """
    if not 0 <= k_prime < k:
        raise ValueError(f"need 0 <= k' < k, got k'={k_prime}, k={k}")
    design = SearchParams(k - k_prime)
    crashed = TrialConfig(
        params=design,
        kind=StrategyKind.nested(),
        treasure=x,
        seed=base_seed,
        step_cap=step_cap,
        crashes=CrashSchedule(tuple((sid, 1) for sid in range(1, k_prime + 1))),
        searchers=k,
    )
    control = TrialConfig(
        params=design,
        kind=StrategyKind.nested(),
        treasure=x,
        seed=base_seed,
        step_cap=step_cap,
    )
    stats_crashed = estimate_speedup(crashed, trials)
    stats_control = estimate_speedup(control, trials)
    return CrashReport(k, k_prime, x, trials, stats_crashed, stats_control,
                       cis_overlap(stats_crashed, stats_control))


@dataclass(frozen=True)
class RobustnessEntry:
    perturbation: str
    stats: RunStats
    speedup_ratio: float
    violation: bool


@dataclass(frozen=True)
class RobustnessReport:
    k: int
    x: int
    trials: int
    tolerance: float
    baseline: RunStats
    entries: tuple[RobustnessEntry, ...]

    @property
    def any_violation(self) -> bool:
        return any(e.violation for e in self.entries)


def robustness_experiment(params: SearchParams, x: int,
                          perturbation_set: Sequence[Perturbation], trials: int,
                          base_seed: int, tolerance: float = 0.05,
                          step_cap: int = 0) -> RobustnessReport:
    """Perturbed vs unperturbed speed-up under shared base seeds.

    Every searcher in the perturbed runs applies the same perturbation.
    Sharing the base seed pairs the runs draw-for-draw, so identity
    perturbations reproduce the baseline bit for bit and the comparison for
    the others is low-variance.  An entry is flagged when its speed-up falls
    more than ``tolerance`` (relative) below the baseline.
    """
    template = TrialConfig(params=params, kind=StrategyKind.nested(), treasure=x,
                           seed=base_seed, step_cap=step_cap)
    baseline = estimate_speedup(template, trials)
    entries = []
    for pert in perturbation_set:
        perturbed = replace(template, perturbations=tuple([pert] * params.k))
        stats = estimate_speedup(perturbed, trials)
        ratio = stats.speedup_point / baseline.speedup_point
        entries.append(RobustnessEntry(pert.describe(), stats, ratio,
                                       ratio < 1.0 - tolerance))
    return RobustnessReport(params.k, x, trials, tolerance, baseline, tuple(entries))


def stats_dict(stats: RunStats) -> dict:
    return {
        "trials": stats.trials,
        "mean_time": stats.mean_time,
        "stderr": stats.stderr,
        "speedup": stats.speedup_point,
        "ci95": [stats.ci95[0], stats.ci95[1]],
        "non_discovery_count": stats.non_discovery_count,
    }


def experiment_report(template: TrialConfig, stats: RunStats) -> dict:
    """JSON-ready report for one Monte Carlo experiment."""
    config = {
        "k": template.params.k,
        "strategy": template.kind.describe(),
        "x": template.treasure,
        "seed": template.seed,
        "step_cap": template.effective_step_cap,
        "searchers": template.fleet_size,
        "crashes": [[sid, when] for sid, when in template.crashes.entries],
        "perturbations": [p.describe() for p in template.perturbations],
    }
    return {"config": config, **stats_dict(stats)}


def sweep_csv(rows: Sequence[tuple[int, int, str, str, RunStats]]) -> str:
    """Long-format CSV for sweeps: one row per (k, x, strategy, perturbation)."""
    lines = ["k,x,strategy,perturbation,trials,mean_time,stderr,speedup"]
    for k, x, strategy, pert, stats in rows:
        lines.append(f"{k},{x},{strategy},{pert},{stats.trials},"
                     f"{stats.mean_time:.12g},{stats.stderr:.12g},"
                     f"{stats.speedup_point:.12g}")
    return "\n".join(lines) + "\n"
