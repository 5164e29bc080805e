"""Tabu search driver: level controller, candidate lists, main loop, traces.

Randomness comes from one ``numpy.random.Generator`` (PCG64) seeded with
``SearchParams.seed``.  Per iteration the draw order is fixed: the level draw
(if any), then one tenure draw per change of the executed move, in change
order.
"""
from __future__ import annotations

import csv
import dataclasses
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import Evaluation, InitRule, Instance, Solution, evaluate, initial_solution, violation
from .moves import (
    LEVEL_ARITY,
    Move,
    Neighborhood,
    SelectMode,
    TabuMemory,
    TenurePolicy,
    apply,
    record,
    select,
)

LOW_LEVELS = (1, 2, 3)
HIGH_LEVELS = (4, 5)
TRACE_HEADER = ["iter", "level", "delta_f", "f", "violation", "best_f", "feasible", "new_best"]


class TraceError(ValueError):
    pass


@dataclass
class SearchParams:
    """Search configuration.

    iterations        total iteration budget (T0)
    stage1            first-stage length, level 2 only (T1)
    no_improve        iterations without a new best that trigger levels 4/5 (T3)
    max_high_run      max consecutive level 4/5 iterations (T4)
    forced_low        low-level iterations forced after a full high run (T5)
    stagnation        stop after this many iterations without a new best
                      feasible solution (T6); ``None`` means 0.8 * iterations
    warmup            statistics-only iterations before candidate lists (T7)
    """

    iterations: int = 1200
    stage1: int = 120
    no_improve: int = 20
    max_high_run: int = 2
    forced_low: int = 10
    stagnation: int | None = None
    warmup: int = 100
    p_low: tuple[float, float, float] = (0.2, 0.5, 0.3)
    p_high: tuple[float, float] = (0.6, 0.4)
    r1: float = 0.5
    r2: float = 0.8
    penalty: int | None = None
    seed: int = 0
    candidate_list: bool = True
    tenure: str = "default"
    init: str = "bal"
    levels: tuple[int, ...] | None = None
    first_improvement_levels: tuple[int, ...] = (4, 5)

    def __post_init__(self):
        if self.iterations < 0 or self.stage1 < 0:
            raise ValueError("iteration counts must be nonnegative")
        if self.stage1 > self.iterations:
            raise ValueError("stage1 must not exceed iterations")
        if not math.isclose(sum(self.p_low), 1.0) or not math.isclose(sum(self.p_high), 1.0):
            raise ValueError("level probabilities must each sum to 1")
        if not (0 < self.r1 <= 1 and 0 < self.r2 <= 1):
            raise ValueError("candidate ratios must lie in (0, 1]")
        if self.levels is not None:
            self.levels = tuple(int(x) for x in self.levels)
            if len(self.levels) != 1 or self.levels[0] not in LEVEL_ARITY:
                raise ValueError("levels must name exactly one level in 1..5")
        TenurePolicy.parse(self.tenure)
        InitRule(self.init)

    @property
    def stage2(self) -> int:
        return self.iterations - self.stage1

    @property
    def stagnation_limit(self) -> int:
        if self.stagnation is not None:
            return self.stagnation
        return self.iterations * 4 // 5

    def replace(self, **changes) -> "SearchParams":
        return dataclasses.replace(self, **changes)


@dataclass
class ControllerState:
    iteration: int = 0
    since_best: int = 0
    since_feasible_best: int = 0
    high_run: int = 0
    forced_low: int = 0
    downgrade: bool = False
    last_level: int = 2


def _draw(rng: np.random.Generator, levels: Sequence[int], probs: Sequence[float]) -> int:
    u = rng.random()
    acc = 0.0
    for level, p in zip(levels, probs):
        acc += p
        if u < acc:
            return level
    return levels[-1]


def choose_level(state: ControllerState, params: SearchParams, rng: np.random.Generator) -> int:
    """Pick the move level for ``state.iteration`` and update the counters.

    Precedence: first stage -> level 2; forced low span -> low draw;
    stagnation -> high draw (while the high run is short enough); pending
    downgrade -> one level lower (a high level falls back to a low draw);
    otherwise a low draw.
    """
    downgrade, state.downgrade = state.downgrade, False
    if params.levels is not None:
        level = params.levels[0]
    elif state.iteration <= params.stage1:
        level = 2
    elif state.forced_low > 0:
        state.forced_low -= 1
        level = _draw(rng, LOW_LEVELS, params.p_low)
    elif state.since_best >= params.no_improve and state.high_run < params.max_high_run:
        level = _draw(rng, HIGH_LEVELS, params.p_high)
    elif downgrade:
        if state.last_level in HIGH_LEVELS:
            level = _draw(rng, LOW_LEVELS, params.p_low)
        else:
            level = max(1, state.last_level - 1)
    else:
        level = _draw(rng, LOW_LEVELS, params.p_low)

    if params.levels is None:
        if level in HIGH_LEVELS:
            state.high_run += 1
            if state.high_run >= params.max_high_run:
                state.forced_low = params.forced_low
        else:
            state.high_run = 0
    state.last_level = level
    return level


@dataclass
class CandidateStats:
    """How often each category took part in an executed move, per PW."""

    counts: np.ndarray
    pw_cats: tuple[tuple[int, ...], ...]

    @classmethod
    def for_instance(cls, instance: Instance) -> "CandidateStats":
        return cls(np.zeros(instance.n_categories, dtype=np.int64), instance.pw_cats)

    def ranked(self, k: int) -> list[int]:
        """Categories of PW ``k`` with a nonzero count, most frequent first."""
        cats = [i for i in self.pw_cats[k] if self.counts[i] > 0]
        return sorted(cats, key=lambda i: (-self.counts[i], i))


def update_stats(stats: CandidateStats, move: Move) -> CandidateStats:
    for ch in move.changes:
        stats.counts[ch.category] += 1
    return stats


_NEEDED = {2: 2, 3: 3, 4: 1, 5: 2}


def candidate_lists(
    stats: CandidateStats, level: int, params: SearchParams, iteration: int
) -> list[list[int] | None] | None:
    """Per-PW category restriction for this iteration, or ``None`` for none.

    A ``None`` entry inside the list means the whole PW is available.
    """
    if not params.candidate_list or iteration <= params.warmup or level == 1:
        return None
    ratio = Fraction(str(params.r1 if level in (2, 3) else params.r2))
    need = _NEEDED[level]
    out: list[list[int] | None] = []
    for k in range(len(stats.pw_cats)):
        ranked = stats.ranked(k)
        n = len(ranked)
        if n < need:
            out.append(None)
            continue
        size = max(math.ceil(n * ratio), need)
        out.append(ranked[:size])
    return out


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    level: int
    delta_f: int
    f: int
    violation: int
    best_f: int
    feasible: bool
    new_best: bool
    new_feasible_best: bool = False


@dataclass
class SearchResult:
    best_solution: Solution | None
    best_f: int | None
    best_overall_f: int
    initial: Evaluation
    trace: list[TraceRecord] = field(default_factory=list)
    iterations: int = 0
    evaluations: int = 0
    seconds: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.best_solution is not None


def run(instance: Instance, params: SearchParams | None = None) -> SearchResult:
    """Run the tabu search once; deterministic for a given instance and seed."""
    params = params or SearchParams()
    started = time.perf_counter()
    if params.penalty is not None and params.penalty != instance.penalty:
        instance = dataclasses.replace(instance, penalty=params.penalty)
    rng = np.random.default_rng(params.seed)
    nb = Neighborhood(instance)
    memory = TabuMemory.for_instance(instance, TenurePolicy.parse(params.tenure))
    stats = CandidateStats.for_instance(instance)
    solution = initial_solution(instance, params.init)
    initial = evaluate(instance, solution)

    current_f = initial.f
    best_f = current_f
    best_solution = solution.copy() if initial.feasible else None
    best_feasible_f = current_f if initial.feasible else None
    state = ControllerState()
    trace: list[TraceRecord] = []
    evaluations = 0
    stop_after = max(params.stagnation_limit, 1)

    for t in range(1, params.iterations + 1):
        state.iteration = t
        level = choose_level(state, params, rng)
        move = None
        for lvl in (level,) + LOW_LEVELS:
            cand = candidate_lists(stats, lvl, params, t)
            allowed = None
            if cand is not None:
                allowed = np.zeros(instance.n_categories, dtype=bool)
                for k, cats in enumerate(cand):
                    allowed[list(instance.pw_cats[k] if cats is None else cats)] = True
            mode = SelectMode.FIRST if lvl in params.first_improvement_levels else SelectMode.BEST
            sel = select(nb.blocks(lvl, solution, allowed, memory, t), solution.choice, current_f, best_f, mode)
            evaluations += sel.evaluations
            move = sel.move
            if move is not None or params.levels is not None:
                break
        if move is None:
            break
        if move.level != level:
            state.last_level = move.level
            state.high_run = 0

        apply(instance, solution, move.changes)
        current_f += move.delta_f
        viol = violation(instance, solution.pw_lengths, solution.total_length)
        record(memory, move, t, rng)
        update_stats(stats, move)

        new_best = current_f > best_f
        if new_best:
            best_f = current_f
            state.since_best = 0
            if t > params.stage1:
                state.downgrade = True
        else:
            state.since_best += 1
        feasible = viol == 0
        new_feasible_best = feasible and (best_feasible_f is None or current_f > best_feasible_f)
        if new_feasible_best:
            best_feasible_f = current_f
            best_solution = solution.copy()
            state.since_feasible_best = 0
        else:
            state.since_feasible_best += 1
        trace.append(
            TraceRecord(t, move.level, move.delta_f, current_f, viol, best_f, feasible, new_best, new_feasible_best)
        )
        if state.since_feasible_best >= stop_after:
            break

    return SearchResult(
        best_solution=best_solution,
        best_f=best_feasible_f,
        best_overall_f=best_f,
        initial=initial,
        trace=trace,
        iterations=len(trace),
        evaluations=evaluations,
        seconds=time.perf_counter() - started,
    )


# --------------------------------------------------------------------------
# traces


def write_trace(trace: Sequence[TraceRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for r in trace:
            w.writerow([r.iteration, r.level, r.delta_f, r.f, r.violation, r.best_f, int(r.feasible), int(r.new_best)])


def read_trace(path: str | Path) -> list[TraceRecord]:
    """Parse a trace CSV; errors name the offending line."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return out
        if header != TRACE_HEADER:
            raise TraceError(f"line 1: expected header {','.join(TRACE_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(TRACE_HEADER):
                raise TraceError(f"line {lineno}: expected {len(TRACE_HEADER)} fields, got {len(row)}")
            try:
                vals = [int(x) for x in row]
            except ValueError as exc:
                raise TraceError(f"line {lineno}: {exc}") from None
            out.append(TraceRecord(*vals[:6], bool(vals[6]), bool(vals[7])))
    return out


def check_trace(trace: Sequence[TraceRecord], params: SearchParams) -> list[str]:
    """Check a full-controller trace against the level rules; returns problems found."""
    problems = []
    levels = [r.level for r in trace]
    high = [lv in HIGH_LEVELS for lv in levels]
    n = len(trace)
    T1, T3, T4, T5 = params.stage1, params.no_improve, params.max_high_run, params.forced_low

    for idx in range(min(T1, n)):
        if levels[idx] != 2:
            problems.append(f"iter {idx + 1}: level {levels[idx]} during first stage")

    idx = 0
    while idx < n:
        if not high[idx]:
            idx += 1
            continue
        end = idx
        while end < n and high[end]:
            end += 1
        run_len = end - idx
        if run_len > T4:
            problems.append(f"iter {idx + 1}: {run_len} consecutive high-level iterations")
        if run_len == T4:
            for j in range(end, min(end + T5, n)):
                if high[j]:
                    problems.append(f"iter {j + 1}: high level inside forced low span")
        if idx < T3 or any(r.new_best for r in trace[idx - T3:idx]):
            problems.append(f"iter {idx + 1}: high level without {T3} stagnant iterations")
        idx = end

    if n > params.iterations:
        problems.append(f"{n} records exceed the budget of {params.iterations}")
    if n < params.iterations:
        tail = trace[max(0, n - max(params.stagnation_limit, 1)):]
        if any(r.new_feasible_best for r in tail):
            problems.append("stopped early although the feasible best improved recently")
    return problems
