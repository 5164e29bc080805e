"""Batch benchmarking: run variants over an instance suite and tabulate gaps."""
from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .model import Instance, load_instance
from .oracle import OptimalResult, OracleBudgetError, brute_force
from .search import SearchParams, run

# short keys accepted in run specs
_KEYS = {
    "iters": ("iterations", int),
    "iterations": ("iterations", int),
    "stage1": ("stage1", int),
    "t3": ("no_improve", int),
    "t4": ("max_high_run", int),
    "t5": ("forced_low", int),
    "t6": ("stagnation", int),
    "t7": ("warmup", int),
    "r1": ("r1", float),
    "r2": ("r2", float),
    "seed": ("seed", int),
    "penalty": ("penalty", int),
    "tenure": ("tenure", str),
    "init": ("init", str),
    "levels": ("levels", lambda s: (int(s),)),
    "cl": ("candidate_list", lambda s: s.lower() in ("1", "on", "true", "yes")),
}


@dataclass(frozen=True)
class RunSpec:
    label: str
    params: dict = field(default_factory=dict)

    @classmethod
    def parse(cls, text: str) -> "RunSpec":
        """``LABEL`` or ``LABEL:key=value,key=value`` (keys as in ``_KEYS``)."""
        label, _, rest = text.partition(":")
        params = {}
        for item in filter(None, rest.split(",")):
            key, eq, value = item.partition("=")
            if not eq or key.strip() not in _KEYS:
                raise ValueError(f"bad run-spec item {item!r} in {text!r}")
            name, conv = _KEYS[key.strip()]
            params[name] = conv(value.strip())
        return cls(label.strip(), params)

    def search_params(self, base: SearchParams | None = None) -> SearchParams:
        return (base or SearchParams()).replace(**self.params)


PRESETS: dict[str, list[RunSpec]] = {
    "budgets": [RunSpec(f"iters-{n}", {"iterations": n}) for n in (300, 600, 900, 1200)],
    "starts": [RunSpec("init-ll", {"init": "ll"}), RunSpec("init-hr", {"init": "hr"}), RunSpec("default")],
    "levels": [RunSpec("default")]
    + [RunSpec(f"level-{lv}", {"levels": (lv,)}) for lv in range(1, 6)]
    + [RunSpec("no-cl", {"candidate_list": False})],
    "tenure": [
        RunSpec("default"),
        RunSpec("tenure-none", {"tenure": "none"}),
        RunSpec("tenure-4", {"tenure": "fixed:4"}),
        RunSpec("tenure-7", {"tenure": "fixed:7"}),
        RunSpec("tenure-mid", {"tenure": "midpoint"}),
    ],
}


@dataclass
class Detail:
    run: str
    instance: str
    found: int | None
    optimum: int
    gap: float | None
    feasible: bool
    seconds: float
    evaluations: int
    iterations: int

    @property
    def optimal(self) -> bool:
        return self.feasible and self.found == self.optimum


@dataclass
class RunRow:
    run: str
    optnum: int
    infnum: int
    avggap: float | None
    maxgap: float | None
    cputm: float
    evaluations: int
    count: int


@dataclass
class BenchReport:
    rows: list[RunRow]
    details: list[Detail]

    def row(self, label: str) -> RunRow:
        return next(r for r in self.rows if r.run == label)


def gap_percent(optimum: int, found: int) -> float:
    return (optimum - found) / optimum * 100.0


def summarize(label: str, details: Sequence[Detail]) -> RunRow:
    gaps = [d.gap for d in details if d.feasible]
    return RunRow(
        run=label,
        optnum=sum(d.optimal for d in details),
        infnum=sum(not d.feasible for d in details),
        avggap=sum(gaps) / len(gaps) if gaps else None,
        maxgap=max(gaps) if gaps else None,
        cputm=sum(d.seconds for d in details),
        evaluations=sum(d.evaluations for d in details),
        count=len(details),
    )


def _cell(args) -> Detail:
    instance, optimum, label, params = args
    started = time.perf_counter()
    res = run(instance, params)
    seconds = time.perf_counter() - started
    gap = gap_percent(optimum, res.best_f) if res.best_f is not None else None
    return Detail(label, instance.id, res.best_f, optimum, gap, res.feasible, seconds, res.evaluations, res.iterations)


def run_bench(
    instances: Sequence[Instance],
    optima: dict[str, int],
    specs: Sequence[RunSpec],
    base: SearchParams | None = None,
    workers: int = 1,
) -> BenchReport:
    """Run every spec on every instance; ``optima`` maps instance id to optimal revenue."""
    missing = [inst.id for inst in instances if inst.id not in optima]
    if missing:
        raise KeyError(f"no oracle optimum for: {', '.join(missing)}")
    jobs = [(inst, optima[inst.id], spec.label, spec.search_params(base)) for spec in specs for inst in instances]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            details = list(pool.map(_cell, jobs, chunksize=4))
    else:
        details = [_cell(job) for job in jobs]
    rows = [summarize(spec.label, [d for d in details if d.run == spec.label]) for spec in specs]
    return BenchReport(rows, details)


def oracle_optima(
    instances: Iterable[Instance], oracle_dir: str | Path | None = None, budget: int | None = None
) -> tuple[dict[str, int], list[str]]:
    """Optimal revenues, read from ``<id>.oracle.json`` when present, else solved.

    Returns ``(optima, problems)`` where ``problems`` lists instances that are
    infeasible or too large for the oracle.
    """
    optima, problems = {}, []
    for inst in instances:
        cached = Path(oracle_dir) / f"{inst.id}.oracle.json" if oracle_dir else None
        if cached is not None and cached.exists():
            data = json.loads(cached.read_text())
            if data.get("status") == "optimal":
                optima[inst.id] = int(data["revenue"])
            else:
                problems.append(f"{inst.id} (infeasible)")
            continue
        try:
            res: OptimalResult = brute_force(inst) if budget is None else brute_force(inst, budget)
        except OracleBudgetError:
            problems.append(f"{inst.id} (over oracle budget)")
            continue
        if not res.feasible:
            problems.append(f"{inst.id} (infeasible)")
            continue
        optima[inst.id] = res.revenue
        if cached is not None:
            cached.parent.mkdir(parents=True, exist_ok=True)
            cached.write_text(json.dumps(res.to_dict(inst), indent=1) + "\n")
    return optima, problems


def load_manifest(path: str | Path) -> list[Instance]:
    path = Path(path)
    data = json.loads(path.read_text())
    return [load_instance(path.parent / entry["file"]) for entry in data["instances"]]


def _fmt(x: float | None, digits: int = 2) -> str:
    return "N/A" if x is None else f"{x:.{digits}f}"


def format_table(report: BenchReport) -> str:
    header = ["RUN", "OPTNUM", "INFNUM", "AVGGAP(%)", "MAXGAP(%)", "CPUTM", "EVALS"]
    body = [
        [r.run, str(r.optnum), str(r.infnum), _fmt(r.avggap), _fmt(r.maxgap), f"{r.cputm:.0f}", str(r.evaluations)]
        for r in report.rows
    ]
    widths = [max(len(row[c]) for row in [header] + body) for c in range(len(header))]
    lines = []
    for n, row in enumerate([header] + body):
        cells = [row[0].ljust(widths[0])] + [cell.rjust(w) for cell, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells))
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def write_csv(report: BenchReport, path: str | Path, details_path: str | Path | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "optnum", "infnum", "avggap", "maxgap", "cputm", "evaluations", "instances"])
        for r in report.rows:
            w.writerow([r.run, r.optnum, r.infnum, _fmt(r.avggap, 4), _fmt(r.maxgap, 4), f"{r.cputm:.3f}",
                        r.evaluations, r.count])
    if details_path is not None:
        with open(details_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["run", "instance", "found", "optimum", "gap", "feasible", "seconds", "evaluations", "iterations"])
            for d in report.details:
                w.writerow([d.run, d.instance, "" if d.found is None else d.found, d.optimum, _fmt(d.gap, 6),
                            int(d.feasible), f"{d.seconds:.4f}", d.evaluations, d.iterations])
