"""Neighborhood moves, incremental evaluation and tabu memory.

Five move levels are supported:

====== ============================================================
level  changes
====== ============================================================
1      one category, any PW
2      two distinct categories of the same PW
3      three distinct categories of the same PW
4      one category in each of two distinct PWs
5      two distinct categories in each of two distinct PWs
====== ============================================================

Each change swaps a category's current option for any other option of the
same category.  Enumeration order is deterministic: PW (or PW pair,
``k1 < k2``), then the tuple of category indices, then the tuple of new
option indices, all ascending.  For two-PW levels the moves are the row-major
product of the first PW's units with the second PW's units.

Large neighborhoods are evaluated block-wise with numpy; :class:`Neighborhood`
holds the static index tables and :func:`select` scans the blocks.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .model import Instance, Solution, window_violation

LEVEL_ARITY = {1: (1,), 2: (2,), 3: (3,), 4: (1, 1), 5: (2, 2)}
MAX_BLOCK = 1 << 18
_NEG = np.iinfo(np.int64).min


class MoveError(ValueError):
    pass


class Change(NamedTuple):
    category: int
    old: int
    new: int


@dataclass(frozen=True)
class Move:
    level: int
    changes: tuple[Change, ...]
    delta_f: int

    def pws(self, instance: Instance) -> tuple[int, ...]:
        return tuple(sorted({int(instance.cat_pw[c.category]) for c in self.changes}))

    def reversed(self) -> tuple[Change, ...]:
        return tuple(Change(c.category, c.new, c.old) for c in self.changes)


def _check_changes(instance: Instance, solution: Solution, changes: Sequence[Change]) -> None:
    seen = set()
    for ch in changes:
        if ch.category in seen:
            raise MoveError(f"category {ch.category} appears twice in one move")
        seen.add(ch.category)
        m = len(instance.categories[ch.category].options)
        if solution.choice[ch.category] != ch.old:
            raise MoveError(f"category {ch.category} is not currently on option {ch.old}")
        if not 0 <= ch.new < m:
            raise MoveError(f"category {ch.category}: option {ch.new} out of range")


def _length_shift(instance: Instance, changes: Sequence[Change]) -> dict[int, int]:
    shift: dict[int, int] = {}
    for ch in changes:
        opts = instance.categories[ch.category].options
        k = int(instance.cat_pw[ch.category])
        shift[k] = shift.get(k, 0) + opts[ch.new].length - opts[ch.old].length
    return shift


def delta_evaluate(instance: Instance, solution: Solution, changes: Sequence[Change]) -> int:
    """Exact change in the penalized objective if ``changes`` were applied.

    Only the touched PW windows and the store window are re-scored.
    """
    _check_changes(instance, solution, changes)
    d_rev = 0
    for ch in changes:
        opts = instance.categories[ch.category].options
        d_rev += opts[ch.new].revenue - opts[ch.old].revenue
    shift = _length_shift(instance, changes)
    d_viol = 0
    for k, dl in shift.items():
        pw = instance.pws[k]
        g = solution.pw_lengths[k]
        d_viol += window_violation(g + dl, pw.lower, pw.upper) - window_violation(g, pw.lower, pw.upper)
    t = solution.total_length
    total = sum(shift.values())
    d_viol += window_violation(t + total, instance.store_lower, instance.store_upper) - window_violation(
        t, instance.store_lower, instance.store_upper
    )
    return d_rev - instance.penalty * d_viol


def apply(instance: Instance, solution: Solution, changes: Sequence[Change]) -> Solution:
    """Apply ``changes`` in place, updating the cached aggregates incrementally."""
    _check_changes(instance, solution, changes)
    for ch in changes:
        opts = instance.categories[ch.category].options
        k = int(instance.cat_pw[ch.category])
        dl = opts[ch.new].length - opts[ch.old].length
        solution.pw_lengths[k] += dl
        solution.total_length += dl
        solution.revenue += opts[ch.new].revenue - opts[ch.old].revenue
        solution.choice[ch.category] = ch.new
    return solution


# --------------------------------------------------------------------------
# tabu memory


def tenure_bounds(n_categories: int) -> tuple[int, int]:
    """(TL, TH) for a PW holding ``n_categories`` categories."""
    low = max(4, n_categories // 2)
    return low, low + min(7, n_categories // 7)


@dataclass(frozen=True)
class TenurePolicy:
    """How tabu tenures are drawn.

    ``kind`` is one of ``default`` (uniform on the PW's [TL, TH]),
    ``fixed`` (always ``value``), ``midpoint`` (``(TL + TH) // 2``) or
    ``none`` (no tabu memory at all).
    """

    kind: str = "default"
    value: int = 0

    @classmethod
    def parse(cls, text: str) -> "TenurePolicy":
        text = text.strip().lower()
        if text.startswith("fixed:"):
            n = int(text.split(":", 1)[1])
            if n < 0:
                raise ValueError("fixed tenure must be nonnegative")
            return cls("fixed", n)
        if text in ("default", "midpoint", "none"):
            return cls(text)
        raise ValueError(f"unknown tenure policy {text!r}")

    def __str__(self) -> str:
        return f"fixed:{self.value}" if self.kind == "fixed" else self.kind

    def bounds(self, n_categories: int) -> tuple[int, int]:
        low, high = tenure_bounds(n_categories)
        if self.kind == "fixed":
            return self.value, self.value
        if self.kind == "midpoint":
            mid = (low + high) // 2
            return mid, mid
        if self.kind == "none":
            return 0, 0
        return low, high


@dataclass
class TabuMemory:
    """``table[i, j]`` is the last iteration at which assigning option j to
    category i is tabu. Unset entries are -1, so nothing is tabu initially."""

    table: np.ndarray
    low: np.ndarray  # per category: TL of its PW
    high: np.ndarray
    policy: TenurePolicy = field(default_factory=TenurePolicy)

    @classmethod
    def for_instance(cls, instance: Instance, policy: TenurePolicy | None = None) -> "TabuMemory":
        policy = policy or TenurePolicy()
        table = np.full(instance.lengths.shape, -1, dtype=np.int64)
        per_pw = [policy.bounds(len(pw.categories)) for pw in instance.pws]
        low = np.array([per_pw[k][0] for k in instance.cat_pw], dtype=np.int64)
        high = np.array([per_pw[k][1] for k in instance.cat_pw], dtype=np.int64)
        return cls(table, low, high, policy)

    @property
    def enabled(self) -> bool:
        return self.policy.kind != "none"


def is_tabu(memory: TabuMemory, move: Move, iteration: int) -> bool:
    """A move is tabu if any of its new assignments is still forbidden."""
    return any(iteration <= memory.table[c.category, c.new] for c in move.changes)


def record(memory: TabuMemory, move: Move, iteration: int, rng: np.random.Generator) -> TabuMemory:
    """Forbid moving each changed category back to its old option."""
    if not memory.enabled:
        return memory
    for ch in move.changes:
        lo, hi = int(memory.low[ch.category]), int(memory.high[ch.category])
        tenure = lo if lo == hi else int(rng.integers(lo, hi + 1))
        memory.table[ch.category, ch.old] = iteration + tenure
    return memory


# --------------------------------------------------------------------------
# vectorized neighborhoods


class SelectMode(enum.Enum):
    BEST = "best"
    FIRST = "first"


@dataclass
class Block:
    """Evaluated moves of one PW (levels 1-3) or one PW pair chunk (4-5).

    ``cats``/``new`` hold per-unit category and new-option tables; for two-PW
    blocks the move at flat index ``r * len(cats[1]) + c`` combines unit ``r``
    of the first PW with unit ``c`` of the second.
    """

    level: int
    cats: tuple[np.ndarray, ...]
    new: tuple[np.ndarray, ...]
    delta: np.ndarray
    tabu: np.ndarray | None = None

    @property
    def size(self) -> int:
        return int(self.delta.shape[0])

    def changes(self, index: int, choice: Sequence[int]) -> tuple[Change, ...]:
        if len(self.cats) == 1:
            parts = [(0, index)]
        else:
            r, c = divmod(index, self.cats[1].shape[0])
            parts = [(0, r), (1, c)]
        out = []
        for side, row in parts:
            for cat, new in zip(self.cats[side][row], self.new[side][row]):
                out.append(Change(int(cat), int(choice[cat]), int(new)))
        return tuple(out)

    def move(self, index: int, choice: Sequence[int]) -> Move:
        return Move(self.level, self.changes(index, choice), int(self.delta[index]))


class Neighborhood:
    """Static unit tables for one instance.

    A unit of arity ``a`` in PW ``k`` is a tuple of ``a`` distinct categories of
    ``k`` plus one "slot" per category. Slot ``s`` stands for the option
    ``s + (s >= current)``, i.e. the s-th option other than the current one,
    so the tables never depend on the solution.
    """

    def __init__(self, instance: Instance):
        self.instance = instance
        self.L = np.ascontiguousarray(instance.lengths)
        self.R = np.ascontiguousarray(instance.revenues)
        self._units: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
        counts = instance.option_counts
        for k, cats in enumerate(instance.pw_cats):
            for arity in (1, 2, 3):
                ucats, uslots = [], []
                for combo in itertools.combinations(cats, arity):
                    for slots in itertools.product(*(range(int(counts[c]) - 1) for c in combo)):
                        ucats.append(combo)
                        uslots.append(slots)
                self._units[k, arity] = (
                    np.array(ucats, dtype=np.int64).reshape(-1, arity),
                    np.array(uslots, dtype=np.int64).reshape(-1, arity),
                )

    def units(self, k: int, arity: int, allowed: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        cats, slots = self._units[k, arity]
        if allowed is not None and cats.shape[0]:
            keep = allowed[cats].all(axis=1)
            cats, slots = cats[keep], slots[keep]
        return cats, slots

    def size(self, level: int, allowed: np.ndarray | None = None) -> int:
        """Number of moves of ``level`` (independent of the current solution)."""
        n_pw = len(self.instance.pws)
        if level <= 3:
            return sum(self.units(k, level, allowed)[0].shape[0] for k in range(n_pw))
        arity = LEVEL_ARITY[level][0]
        sizes = [self.units(k, arity, allowed)[0].shape[0] for k in range(n_pw)]
        return sum(sizes[a] * sizes[b] for a, b in itertools.combinations(range(n_pw), 2))

    def _unit_deltas(self, cats, slots, cur):
        old = cur[cats]
        new = slots + (slots >= old)
        d_len = (self.L[cats, new] - self.L[cats, old]).sum(axis=1)
        d_rev = (self.R[cats, new] - self.R[cats, old]).sum(axis=1)
        return new, d_len, d_rev

    def blocks(
        self,
        level: int,
        solution: Solution,
        allowed: np.ndarray | None = None,
        memory: TabuMemory | None = None,
        iteration: int = 0,
    ) -> Iterator[Block]:
        """Yield evaluated blocks of ``level`` moves in enumeration order.

        ``allowed`` is a boolean mask over categories (candidate list); when
        ``memory`` is given every block also carries its tabu mask.
        """
        inst = self.instance
        cur = np.asarray(solution.choice, dtype=np.int64)
        P = inst.penalty
        G = solution.pw_lengths
        T = solution.total_length
        LS, US = inst.store_lower, inst.store_upper
        store_old = window_violation(T, LS, US)
        tabu_on = memory is not None and memory.enabled

        def pw_dviol(k, d_len):
            pw = inst.pws[k]
            g = G[k] + d_len
            return (
                np.maximum(0, g - pw.upper) + np.maximum(0, pw.lower - g)
                - window_violation(G[k], pw.lower, pw.upper)
            )

        def store_dviol(d_len):
            t = T + d_len
            return np.maximum(0, t - US) + np.maximum(0, LS - t) - store_old

        def unit_tabu(cats, new):
            return (memory.table[cats, new] >= iteration).any(axis=1)

        if level in (1, 2, 3):
            for k in range(len(inst.pws)):
                cats, slots = self.units(k, level, allowed)
                if not cats.shape[0]:
                    continue
                new, d_len, d_rev = self._unit_deltas(cats, slots, cur)
                delta = d_rev - P * (pw_dviol(k, d_len) + store_dviol(d_len))
                tabu = unit_tabu(cats, new) if tabu_on else None
                yield Block(level, (cats,), (new,), delta, tabu)
            return

        if level not in (4, 5):
            raise MoveError(f"unknown move level {level}")
        arity = LEVEL_ARITY[level][0]
        evaluated = {}
        for k in range(len(inst.pws)):
            cats, slots = self.units(k, arity, allowed)
            if cats.shape[0]:
                new, d_len, d_rev = self._unit_deltas(cats, slots, cur)
                tabu = unit_tabu(cats, new) if tabu_on else None
                evaluated[k] = (cats, new, d_len, d_rev, pw_dviol(k, d_len), tabu)
        for k1, k2 in itertools.combinations(range(len(inst.pws)), 2):
            if k1 not in evaluated or k2 not in evaluated:
                continue
            c1, n1, l1, r1, v1, t1 = evaluated[k1]
            c2, n2, l2, r2, v2, t2 = evaluated[k2]
            step = max(1, MAX_BLOCK // c2.shape[0])
            for lo in range(0, c1.shape[0], step):
                hi = lo + step
                d_len = l1[lo:hi, None] + l2[None, :]
                delta = (r1[lo:hi, None] + r2[None, :]) - P * (
                    v1[lo:hi, None] + v2[None, :] + store_dviol(d_len)
                )
                tabu = (t1[lo:hi, None] | t2[None, :]).ravel() if tabu_on else None
                yield Block(level, (c1[lo:hi], c2), (n1[lo:hi], n2), delta.ravel(), tabu)


def candidate_mask(instance: Instance, candidates: Sequence[Sequence[int] | None] | None) -> np.ndarray | None:
    """Boolean category mask from per-PW candidate lists (``None`` = whole PW)."""
    if candidates is None:
        return None
    mask = np.zeros(instance.n_categories, dtype=bool)
    for k, cats in enumerate(candidates):
        mask[list(instance.pw_cats[k] if cats is None else cats)] = True
    return mask


def enumerate_moves(
    level: int,
    instance: Instance,
    solution: Solution,
    candidates: Sequence[Sequence[int] | None] | None = None,
    neighborhood: Neighborhood | None = None,
) -> Iterator[Move]:
    """Every legal move of ``level`` with its exact delta, in enumeration order.

    Levels 4 and 5 on a single-PW instance yield nothing.
    """
    nb = neighborhood or Neighborhood(instance)
    for block in nb.blocks(level, solution, candidate_mask(instance, candidates)):
        for idx in range(block.size):
            yield block.move(idx, solution.choice)


def select_best(
    moves: Iterator[Move] | Sequence[Move],
    memory: TabuMemory,
    iteration: int,
    current_f: int,
    best_f: int,
    mode: SelectMode = SelectMode.BEST,
) -> Move | None:
    """Pick the admissible move with the largest delta.

    A tabu move is admissible when it would beat ``best_f`` (aspiration).
    In ``FIRST`` mode the first move beating ``best_f`` is taken at once.
    Returns ``None`` if there are no moves or none is admissible; see
    :func:`least_bad` for the escape choice.
    """
    best = None
    for mv in moves:
        improving = current_f + mv.delta_f > best_f
        if mode is SelectMode.FIRST and improving:
            return mv
        if (improving or not is_tabu(memory, mv, iteration)) and (best is None or mv.delta_f > best.delta_f):
            best = mv
    return best


def least_bad(moves: Iterator[Move] | Sequence[Move]) -> Move | None:
    """Escape choice when every move is tabu: the largest delta, earliest first."""
    best = None
    for mv in moves:
        if best is None or mv.delta_f > best.delta_f:
            best = mv
    return best


@dataclass
class Selection:
    move: Move | None
    evaluations: int
    escaped: bool = False


def select(
    blocks: Iterator[Block],
    choice: Sequence[int],
    current_f: int,
    best_f: int,
    mode: SelectMode = SelectMode.BEST,
) -> Selection:
    """Block-wise equivalent of :func:`select_best` followed by :func:`least_bad`.

    Blocks must carry tabu masks (or ``None`` when memory is off).  In
    ``FIRST`` mode scanning stops after the block holding the first move that
    beats ``best_f``; ``evaluations`` counts the moves of every scanned block.
    """
    evaluations = 0
    best: tuple[int, Block, int] | None = None
    fallback: tuple[int, Block, int] | None = None
    threshold = best_f - current_f
    for block in blocks:
        evaluations += block.size
        if not block.size:
            continue
        delta = block.delta
        improving = delta > threshold
        if mode is SelectMode.FIRST:
            hits = np.flatnonzero(improving)
            if hits.size:
                return Selection(block.move(int(hits[0]), choice), evaluations)
        if block.tabu is None:
            idx = int(np.argmax(delta))
            value = int(delta[idx])
        else:
            admissible = ~block.tabu | improving
            if admissible.any():
                masked = np.where(admissible, delta, _NEG)
                idx = int(np.argmax(masked))
                value = int(masked[idx])
            else:
                idx = int(np.argmax(delta))
                if fallback is None or int(delta[idx]) > fallback[0]:
                    fallback = (int(delta[idx]), block, idx)
                continue
        if best is None or value > best[0]:
            best = (value, block, idx)
    if best is not None:
        return Selection(best[1].move(best[2], choice), evaluations)
    if fallback is not None:
        return Selection(fallback[1].move(fallback[2], choice), evaluations, escaped=True)
    return Selection(None, evaluations)

