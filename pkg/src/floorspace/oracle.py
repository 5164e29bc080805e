"""Exact reference solver and LP export.

The exact solver enumerates every assignment of each PW, drops those that
break the PW window, then joins PWs one at a time.  A partial join is pruned
when no completion can land inside the store window.  Rows are kept in
lexicographic order of the choice vector throughout, so the first maximum
found is the lexicographically smallest optimal assignment.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Mapping

import numpy as np

from .model import Instance, Solution, is_feasible

DEFAULT_BUDGET = 20_000_000
_CHUNK = 1 << 20


class OracleBudgetError(RuntimeError):
    """The assignment space is larger than the oracle is allowed to search."""


@dataclass
class OptimalResult:
    status: str  # "optimal" or "infeasible"
    revenue: int | None
    choice: list[int] | None
    explored: int
    seconds: float

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"

    def to_dict(self, instance: Instance) -> dict:
        data = {
            "instance_id": instance.id,
            "status": self.status,
            "revenue": self.revenue,
            "explored": self.explored,
            "seconds": round(self.seconds, 3),
        }
        if self.choice is not None:
            data["choices"] = [
                {"category": c.id, "option": c.options[j].id, "index": j}
                for c, j in zip(instance.categories, self.choice)
            ]
        return data


def revenue_upper_bound(instance: Instance) -> int:
    return sum(max(o.revenue for o in c.options) for c in instance.categories)


def _check_budget(instance: Instance, budget: int) -> None:
    size = instance.combinations()
    if size > budget:
        raise OracleBudgetError(f"instance {instance.id!r} has {size} assignments, over the oracle budget of {budget}")


def _pw_table(instance: Instance, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Window-feasible assignments of PW ``k`` in lexicographic order."""
    cats = instance.pw_cats[k]
    counts = [len(instance.categories[i].options) for i in cats]
    grid = np.indices(counts).reshape(len(cats), -1).T  # row-major == lexicographic
    L = instance.lengths[list(cats)]
    R = instance.revenues[list(cats)]
    cols = np.arange(len(cats))
    lengths = L[cols, grid].sum(axis=1)
    revenues = R[cols, grid].sum(axis=1)
    pw = instance.pws[k]
    keep = (lengths >= pw.lower) & (lengths <= pw.upper)
    return grid[keep], lengths[keep], revenues[keep], grid.shape[0]


def brute_force(instance: Instance, budget: int = DEFAULT_BUDGET) -> OptimalResult:
    """Revenue-maximal feasible assignment, ties broken lexicographically."""
    started = time.perf_counter()
    _check_budget(instance, budget)
    tables = []
    explored = 0
    for k in range(len(instance.pws)):
        grid, lengths, revenues, n = _pw_table(instance, k)
        explored += n
        tables.append((grid, lengths, revenues))
    if any(t[1].size == 0 for t in tables):
        return OptimalResult("infeasible", None, None, explored, time.perf_counter() - started)

    mins = [int(t[1].min()) for t in tables]
    maxs = [int(t[1].max()) for t in tables]
    LS, US = instance.store_lower, instance.store_upper

    # rows of the running join: total length, revenue, index into each PW table
    tot_len = tables[0][1].copy()
    tot_rev = tables[0][2].copy()
    idx = [np.arange(tot_len.size)]
    last = len(tables) - 1
    best = None  # (revenue, [per-PW row index])
    for k in range(len(tables)):
        rest_min = sum(mins[k + 1:])
        rest_max = sum(maxs[k + 1:])
        if k == 0:
            keep = (tot_len + rest_min <= US) & (tot_len + rest_max >= LS)
            tot_len, tot_rev, idx = tot_len[keep], tot_rev[keep], [i[keep] for i in idx]
            if tot_len.size == 0:
                break
            continue
        _, b_len, b_rev = tables[k]
        step = max(1, _CHUNK // b_len.size)
        parts = []
        for lo in range(0, tot_len.size, step):
            hi = lo + step
            cl = tot_len[lo:hi, None] + b_len[None, :]
            cr = tot_rev[lo:hi, None] + b_rev[None, :]
            explored += cl.size
            ok = (cl + rest_min <= US) & (cl + rest_max >= LS)
            rows, cols = np.nonzero(ok)
            if k == last:
                if rows.size:
                    vals = cr[rows, cols]
                    j = int(np.argmax(vals))
                    if best is None or int(vals[j]) > best[0]:
                        r = lo + int(rows[j])
                        best = (int(vals[j]), [int(i[r]) for i in idx] + [int(cols[j])])
            else:
                parts.append((rows + lo, cols, cl[rows, cols], cr[rows, cols]))
        if k == last:
            break
        rows = np.concatenate([p[0] for p in parts])
        cols = np.concatenate([p[1] for p in parts])
        tot_len = np.concatenate([p[2] for p in parts])
        tot_rev = np.concatenate([p[3] for p in parts])
        idx = [i[rows] for i in idx] + [cols]
        if tot_len.size == 0:
            break

    if len(tables) == 1 and tot_len.size:
        j = int(np.argmax(tot_rev))
        best = (int(tot_rev[j]), [int(idx[0][j])])

    elapsed = time.perf_counter() - started
    if best is None:
        return OptimalResult("infeasible", None, None, explored, elapsed)
    choice = []
    for (grid, _, _), row in zip(tables, best[1]):
        choice.extend(int(x) for x in grid[row])
    return OptimalResult("optimal", best[0], choice, explored, elapsed)


def naive_enumerate(instance: Instance, budget: int = 100_000) -> OptimalResult:
    """Plain exhaustive enumeration without pruning, for cross-checking."""
    started = time.perf_counter()
    _check_budget(instance, budget)
    best_rev, best_choice, n = None, None, 0
    for choice in itertools.product(*(range(len(c.options)) for c in instance.categories)):
        n += 1
        sol = Solution.from_choice(instance, choice)
        if is_feasible(instance, sol) and (best_rev is None or sol.revenue > best_rev):
            best_rev, best_choice = sol.revenue, list(choice)
    status = "infeasible" if best_rev is None else "optimal"
    return OptimalResult(status, best_rev, best_choice, n, time.perf_counter() - started)


# --------------------------------------------------------------------------
# LP export


def lp_variable(category: int, option: int) -> str:
    """Name of the binary for category ``category`` (flat index) on option ``option``."""
    return f"x_{category}_{option}"


def _wrap(prefix: str, terms: list[str], suffix: str, width: int = 200) -> list[str]:
    lines, line = [], " " + prefix
    for term in terms:
        piece = " " + term
        if len(line) + len(piece) > width:
            lines.append(line)
            line = "   "
        line += piece
    lines.append(line + " " + suffix if suffix else line)
    return lines


def _linear(pairs: list[tuple[int, str]]) -> list[str]:
    terms = []
    for n, (coef, name) in enumerate(pairs):
        sign = "" if n == 0 else "+ "
        terms.append(f"{sign}{coef} {name}")
    return terms


def export_mip(instance: Instance, destination: str | Path | IO[str] | None = None) -> str:
    """Write the integer program in CPLEX LP format and return the text.

    Variables are ``x_<category>_<option>`` using flat category indices and
    option positions; rows are ``assign_<i>``, ``pw_lo_<k>``, ``pw_up_<k>``,
    ``store_lo`` and ``store_up``.
    """
    cats = instance.categories
    out = [f"\\ floor space instance {instance.id}", "Maximize"]
    obj = [(o.revenue, lp_variable(i, j)) for i, c in enumerate(cats) for j, o in enumerate(c.options)]
    out += _wrap("revenue:", _linear(obj), "")
    out.append("Subject To")
    for i, c in enumerate(cats):
        out += _wrap(f"assign_{i}:", _linear([(1, lp_variable(i, j)) for j in range(len(c.options))]), "= 1")
    for k, pw in enumerate(instance.pws):
        terms = _linear(
            [(instance.categories[i].options[j].length, lp_variable(i, j))
             for i in instance.pw_cats[k] for j in range(len(cats[i].options))]
        )
        out += _wrap(f"pw_lo_{k}:", terms, f">= {pw.lower}")
        out += _wrap(f"pw_up_{k}:", terms, f"<= {pw.upper}")
    store = _linear([(o.length, lp_variable(i, j)) for i, c in enumerate(cats) for j, o in enumerate(c.options)])
    out += _wrap("store_lo:", store, f">= {instance.store_lower}")
    out += _wrap("store_up:", store, f"<= {instance.store_upper}")
    out.append("Binary")
    names = [lp_variable(i, j) for i, c in enumerate(cats) for j in range(len(c.options))]
    for n in range(0, len(names), 10):
        out.append(" " + " ".join(names[n:n + 10]))
    out.append("End")
    text = "\n".join(out) + "\n"
    if isinstance(destination, (str, Path)):
        Path(destination).write_text(text)
    elif destination is not None:
        destination.write(text)
    return text


def choice_from_values(instance: Instance, values: Mapping[str, float]) -> list[int]:
    """Map an external solver's variable values back to a choice vector."""
    choice = []
    for i, c in enumerate(instance.categories):
        picked = [j for j in range(len(c.options)) if values.get(lp_variable(i, j), 0.0) > 0.5]
        if len(picked) != 1:
            raise ValueError(f"category {c.id!r}: expected one selected option, got {picked}")
        choice.append(picked[0])
    return choice

