"""Store floor-space data model, penalized objective and initial solutions.

A store is a list of planogram worlds (PWs). Each PW holds categories and
each category owns an ordered sequence of planogram options, each with an
integer length and revenue. A solution picks exactly one option per
category; categories are addressed by their flat index (PW order, then
category order within the PW).
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

INSTANCE_SCHEMA = "floorspace.instance/1"
SOLUTION_SCHEMA = "floorspace.solution/1"
DEFAULT_PENALTY = 20000


class InstanceError(ValueError):
    """Malformed or inconsistent instance data."""


class SolutionError(ValueError):
    """A choice map that does not fit its instance."""


@dataclass(frozen=True)
class PlanogramOption:
    id: str
    length: int
    revenue: int

    def __post_init__(self):
        if not isinstance(self.length, int) or self.length < 1:
            raise InstanceError(f"option {self.id!r}: length must be a positive integer")
        if not isinstance(self.revenue, int) or self.revenue < 1:
            raise InstanceError(f"option {self.id!r}: revenue must be a positive integer")


@dataclass(frozen=True)
class Category:
    id: str
    options: tuple[PlanogramOption, ...]
    current_option: int = 0

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        if not self.options:
            raise InstanceError(f"category {self.id!r} has no planogram options")
        if not 0 <= self.current_option < len(self.options):
            raise InstanceError(f"category {self.id!r}: current option out of range")


@dataclass(frozen=True)
class PlanogramWorld:
    id: str
    lower: int
    upper: int
    categories: tuple[Category, ...]

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        if not self.categories:
            raise InstanceError(f"planogram world {self.id!r} has no categories")
        if not 0 <= self.lower <= self.upper:
            raise InstanceError(f"planogram world {self.id!r}: need 0 <= lower <= upper")


@dataclass(frozen=True)
class Instance:
    """Immutable problem data. Derived lookup arrays are cached lazily."""

    pws: tuple[PlanogramWorld, ...]
    store_lower: int
    store_upper: int
    penalty: int = DEFAULT_PENALTY
    id: str = "instance"
    provenance: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "pws", tuple(self.pws))
        if not self.pws:
            raise InstanceError("instance has no planogram worlds")
        if not 0 <= self.store_lower <= self.store_upper:
            raise InstanceError("store window: need 0 <= lower <= upper")
        if self.penalty < 0:
            raise InstanceError("penalty must be nonnegative")
        seen: set[str] = set()
        for cat in self.categories:
            for opt in cat.options:
                if opt.id in seen:
                    raise InstanceError(f"option id {opt.id!r} is used more than once")
                seen.add(opt.id)

    @cached_property
    def categories(self) -> tuple[Category, ...]:
        return tuple(c for pw in self.pws for c in pw.categories)

    @cached_property
    def cat_pw(self) -> np.ndarray:
        """PW index of every category."""
        return np.array([k for k, pw in enumerate(self.pws) for _ in pw.categories], dtype=np.int64)

    @cached_property
    def pw_cats(self) -> tuple[tuple[int, ...], ...]:
        """Flat category indices grouped by PW."""
        out, start = [], 0
        for pw in self.pws:
            out.append(tuple(range(start, start + len(pw.categories))))
            start += len(pw.categories)
        return tuple(out)

    @cached_property
    def option_counts(self) -> np.ndarray:
        return np.array([len(c.options) for c in self.categories], dtype=np.int64)

    @cached_property
    def lengths(self) -> np.ndarray:
        """(n_categories, max_options) lengths, zero padded."""
        return self._padded("length")

    @cached_property
    def revenues(self) -> np.ndarray:
        return self._padded("revenue")

    @cached_property
    def pw_lower(self) -> np.ndarray:
        return np.array([pw.lower for pw in self.pws], dtype=np.int64)

    @cached_property
    def pw_upper(self) -> np.ndarray:
        return np.array([pw.upper for pw in self.pws], dtype=np.int64)

    def _padded(self, attr: str) -> np.ndarray:
        arr = np.zeros((len(self.categories), int(self.option_counts.max())), dtype=np.int64)
        for i, cat in enumerate(self.categories):
            arr[i, : len(cat.options)] = [getattr(o, attr) for o in cat.options]
        arr.flags.writeable = False
        return arr

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    def combinations(self) -> int:
        """Size of the full assignment space, prod_i |J_i|."""
        return int(np.prod([len(c.options) for c in self.categories], dtype=object))

    def current_choice(self) -> list[int]:
        return [c.current_option for c in self.categories]


@dataclass
class Solution:
    """One option index per category plus cached length/revenue aggregates."""

    choice: list[int]
    pw_lengths: list[int]
    total_length: int
    revenue: int

    @classmethod
    def from_choice(cls, instance: Instance, choice: Sequence[int]) -> "Solution":
        sol = cls(list(int(c) for c in choice), [], 0, 0)
        refresh(instance, sol)
        return sol

    def copy(self) -> "Solution":
        return Solution(list(self.choice), list(self.pw_lengths), self.total_length, self.revenue)


@dataclass(frozen=True)
class Evaluation:
    revenue: int
    violation: int
    f: int

    @property
    def feasible(self) -> bool:
        return self.violation == 0


class InitRule(enum.Enum):
    LEAST_LENGTH = "ll"
    HIGHEST_REVENUE = "hr"
    BALANCED = "bal"


def _check_choice(instance: Instance, choice: Sequence[int]) -> None:
    if len(choice) != instance.n_categories:
        raise SolutionError(
            f"choice has {len(choice)} entries, instance has {instance.n_categories} categories"
        )
    for i, (j, cat) in enumerate(zip(choice, instance.categories)):
        if not 0 <= j < len(cat.options):
            raise SolutionError(f"category {cat.id!r} (index {i}): option index {j} out of range")


def refresh(instance: Instance, solution: Solution) -> None:
    """Recompute the cached aggregates of ``solution`` from its choice map."""
    _check_choice(instance, solution.choice)
    pw_lengths = []
    revenue = 0
    for cats in instance.pw_cats:
        g = 0
        for i in cats:
            opt = instance.categories[i].options[solution.choice[i]]
            g += opt.length
            revenue += opt.revenue
        pw_lengths.append(g)
    solution.pw_lengths = pw_lengths
    solution.total_length = sum(pw_lengths)
    solution.revenue = revenue


def window_violation(value: int, lower: int, upper: int) -> int:
    return max(0, value - upper) + max(0, lower - value)


def violation(instance: Instance, pw_lengths: Sequence[int], total_length: int) -> int:
    """Total length violation over every PW window and the store window."""
    v = sum(window_violation(g, pw.lower, pw.upper) for g, pw in zip(pw_lengths, instance.pws))
    return v + window_violation(total_length, instance.store_lower, instance.store_upper)


def evaluate(instance: Instance, solution: Solution) -> Evaluation:
    refresh(instance, solution)
    v = violation(instance, solution.pw_lengths, solution.total_length)
    return Evaluation(solution.revenue, v, solution.revenue - instance.penalty * v)


def is_feasible(instance: Instance, solution: Solution) -> bool:
    return evaluate(instance, solution).violation == 0


def _pick(options: Sequence[PlanogramOption], rule: InitRule) -> int:
    best = 0
    for j in range(1, len(options)):
        a, b = options[j], options[best]
        if rule is InitRule.LEAST_LENGTH:
            better = a.length < b.length
        elif rule is InitRule.HIGHEST_REVENUE:
            better = a.revenue > b.revenue
        else:
            # revenue per length unit, compared by cross-multiplication
            better = a.revenue * b.length > b.revenue * a.length
        if better:
            best = j
    return best


def initial_solution(instance: Instance, rule: InitRule | str = InitRule.BALANCED) -> Solution:
    """Build a starting solution with one of the three greedy per-category rules.

    Ties go to the lowest option index.
    """
    rule = InitRule(rule)
    return Solution.from_choice(instance, [_pick(c.options, rule) for c in instance.categories])


# --------------------------------------------------------------------------
# JSON file formats


def instance_to_dict(instance: Instance) -> dict[str, Any]:
    data: dict[str, Any] = {
        "schema": INSTANCE_SCHEMA,
        "id": instance.id,
        "penalty": instance.penalty,
        "store": {"ls": instance.store_lower, "us": instance.store_upper},
        "pws": [
            {
                "id": pw.id,
                "ll": pw.lower,
                "ul": pw.upper,
                "categories": [
                    {
                        "id": c.id,
                        "current": c.current_option,
                        "options": [
                            {"id": o.id, "length": o.length, "revenue": o.revenue} for o in c.options
                        ],
                    }
                    for c in pw.categories
                ],
            }
            for pw in instance.pws
        ],
    }
    if instance.provenance is not None:
        data["provenance"] = instance.provenance
    return data


def _field(obj: Any, key: str, where: str, kind: type | tuple[type, ...] = int) -> Any:
    if not isinstance(obj, dict) or key not in obj:
        raise InstanceError(f"missing field '{where}.{key}'")
    value = obj[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise InstanceError(f"field '{where}.{key}' must be an integer, got {value!r}")
    if kind is not int and not isinstance(value, kind):
        raise InstanceError(f"field '{where}.{key}' has the wrong type: {value!r}")
    return value


def instance_from_dict(data: dict[str, Any]) -> Instance:
    if not isinstance(data, dict):
        raise InstanceError("instance document must be a JSON object")
    schema = data.get("schema", INSTANCE_SCHEMA)
    if schema != INSTANCE_SCHEMA:
        raise InstanceError(f"field 'schema': unsupported value {schema!r}")
    store = _field(data, "store", "", dict)
    pws = []
    for k, pw in enumerate(_field(data, "pws", "", list)):
        where = f"pws[{k}]"
        cats = []
        for c, cat in enumerate(_field(pw, "categories", where, list)):
            cwhere = f"{where}.categories[{c}]"
            opts = []
            for j, opt in enumerate(_field(cat, "options", cwhere, list)):
                owhere = f"{cwhere}.options[{j}]"
                opts.append(
                    PlanogramOption(
                        str(_field(opt, "id", owhere, (str, int))),
                        _field(opt, "length", owhere),
                        _field(opt, "revenue", owhere),
                    )
                )
            cats.append(
                Category(str(_field(cat, "id", cwhere, (str, int))), tuple(opts), cat.get("current", 0))
            )
        pws.append(
            PlanogramWorld(
                str(_field(pw, "id", where, (str, int))),
                _field(pw, "ll", where),
                _field(pw, "ul", where),
                tuple(cats),
            )
        )
    return Instance(
        tuple(pws),
        _field(store, "ls", "store"),
        _field(store, "us", "store"),
        penalty=data.get("penalty", DEFAULT_PENALTY),
        id=str(data.get("id", "instance")),
        provenance=data.get("provenance"),
    )


def dumps_instance(instance: Instance) -> str:
    return json.dumps(instance_to_dict(instance), indent=1) + "\n"


def save_instance(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(dumps_instance(instance))


def load_instance(path: str | Path) -> Instance:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: invalid JSON ({exc})") from exc
    return instance_from_dict(data)


def solution_to_dict(instance: Instance, solution: Solution, **extra: Any) -> dict[str, Any]:
    ev = evaluate(instance, solution)
    data = {
        "schema": SOLUTION_SCHEMA,
        "instance_id": instance.id,
        "choices": [
            {"category": cat.id, "option": cat.options[j].id, "index": j}
            for cat, j in zip(instance.categories, solution.choice)
        ],
        "revenue": ev.revenue,
        "violation": ev.violation,
        "f": ev.f,
        "feasible": ev.feasible,
    }
    data.update(extra)
    return data


def solution_from_dict(instance: Instance, data: dict[str, Any]) -> Solution:
    by_cat = {c["category"]: c for c in data["choices"]}
    choice = []
    for cat in instance.categories:
        if cat.id not in by_cat:
            raise SolutionError(f"solution has no choice for category {cat.id!r}")
        entry = by_cat[cat.id]
        ids = [o.id for o in cat.options]
        if entry.get("option") in ids:
            choice.append(ids.index(entry["option"]))
        else:
            choice.append(int(entry["index"]))
    return Solution.from_choice(instance, choice)


def make_instance(
    pws: Iterable[tuple[int, int, Iterable[Iterable[tuple[int, int]]]]],
    store: tuple[int, int],
    penalty: int = DEFAULT_PENALTY,
    id: str = "instance",
) -> Instance:
    """Compact constructor: ``pws`` holds ``(ll, ul, [[(length, revenue), ...], ...])``."""
    out, n = [], 0
    for k, (ll, ul, cats) in enumerate(pws):
        cs = []
        for c, opts in enumerate(cats):
            os_ = []
            for length, revenue in opts:
                os_.append(PlanogramOption(f"p{n}", length, revenue))
                n += 1
            cs.append(Category(f"k{k}c{c}", tuple(os_)))
        out.append(PlanogramWorld(f"k{k}", ll, ul, tuple(cs)))
    return Instance(tuple(out), store[0], store[1], penalty=penalty, id=id)
