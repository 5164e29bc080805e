"""Command line interface: ``floorspace generate|solve|oracle|bench|plot``.

Exit codes: 0 success / feasible solution, 2 infeasible, 3 input error,
4 oracle budget exceeded.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import bench as bench_mod
from .generator import PROFILES, ConfigError, GenConfig, generate
from .model import InstanceError, dumps_instance, load_instance, solution_to_dict
from .oracle import DEFAULT_BUDGET, OracleBudgetError, brute_force, export_mip
from .search import SearchParams, TraceError, read_trace, run, write_trace

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_BUDGET = 0, 2, 3, 4
OUTPUT_ENV = "FLOORSPACE_OUTPUT_DIR"

log = logging.getLogger("floorspace")


class UsageError(Exception):
    pass


def _out_dir(value: str | None) -> Path:
    return Path(value or os.environ.get(OUTPUT_ENV) or ".")


def parse_seeds(text: str) -> list[int]:
    """``7``, ``1-100`` or ``1,5,9``; a descending range is empty."""
    seeds: list[int] = []
    for part in filter(None, text.split(",")):
        if "-" in part.strip()[1:]:
            lo, hi = part.split("-", 1) if not part.startswith("-") else part[1:].split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    return seeds


def _int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


# --------------------------------------------------------------------------


def cmd_generate(args) -> int:
    base = PROFILES[args.profile]
    overrides = {}
    if args.pws is not None:
        overrides["pw_count"] = args.pws
    if args.categories is not None:
        overrides["categories_per_pw"] = args.categories if len(args.categories) > 1 else args.categories[0]
    if args.options is not None:
        overrides["options_per_category"] = args.options if len(args.options) > 1 else args.options[0]
    try:
        config = GenConfig(**{**base.__dict__, **overrides})
    except (ConfigError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    out = _out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for seed in parse_seeds(args.seeds):
        inst = generate(config.with_seed(seed))
        name = f"{inst.id}.json"
        (out / name).write_text(dumps_instance(inst))
        entries.append({"id": inst.id, "seed": seed, "file": name})
    manifest = {"profile": args.profile, "instances": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    print(f"wrote {len(entries)} instances to {out}")
    return EXIT_OK


def params_from_args(args) -> SearchParams:
    kw = dict(
        iterations=args.iters,
        stage1=args.stage1,
        no_improve=args.t3,
        max_high_run=args.t4,
        forced_low=args.t5,
        stagnation=args.t6,
        warmup=args.t7,
        p_low=tuple(args.p_low),
        p_high=tuple(args.p_high),
        r1=args.r1,
        r2=args.r2,
        penalty=args.penalty,
        seed=args.seed,
        candidate_list=not args.no_candidate_list,
        tenure=args.tenure,
        init=args.init,
        levels=args.levels,
        first_improvement_levels=args.first_improvement_levels,
    )
    try:
        return SearchParams(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_solve(args) -> int:
    instance = load_instance(args.instance)
    params = params_from_args(args)
    result = run(instance, params)
    if args.trace:
        write_trace(result.trace, args.trace)
    out = Path(args.out) if args.out else _out_dir(None) / f"{instance.id}.solution.json"
    if result.best_solution is not None:
        data = solution_to_dict(instance, result.best_solution)
    else:
        data = {"schema": "floorspace.solution/1", "instance_id": instance.id, "choices": [],
                "revenue": None, "violation": None, "f": None, "feasible": False}
    data.update(iterations=result.iterations, evaluations=result.evaluations,
                seconds=round(result.seconds, 3), best_overall_f=result.best_overall_f)
    out.write_text(json.dumps(data, indent=1) + "\n")
    if result.feasible:
        print(f"{instance.id}: revenue {result.best_f} after {result.iterations} iterations")
        return EXIT_OK
    print(f"{instance.id}: no feasible solution after {result.iterations} iterations")
    return EXIT_INFEASIBLE


def cmd_oracle(args) -> int:
    instance = load_instance(args.instance)
    if args.export_lp:
        export_mip(instance, args.export_lp)
        print(f"wrote LP model to {args.export_lp}")
    try:
        res = brute_force(instance, args.budget)
    except OracleBudgetError as exc:
        if args.export_lp:
            log.warning("%s; only the LP file was written", exc)
            return EXIT_OK
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    out = Path(args.out) if args.out else _out_dir(None) / f"{instance.id}.oracle.json"
    out.write_text(json.dumps(res.to_dict(instance), indent=1) + "\n")
    print(f"{instance.id}: {res.status} revenue={res.revenue} explored={res.explored}")
    return EXIT_OK if res.feasible else EXIT_INFEASIBLE


def cmd_bench(args) -> int:
    instances = bench_mod.load_manifest(args.manifest)
    specs = [s for name in args.preset for s in bench_mod.PRESETS[name]]
    specs += [bench_mod.RunSpec.parse(text) for text in args.run]
    if not specs:
        specs = [bench_mod.RunSpec("default")]
    optima, problems = bench_mod.oracle_optima(instances, args.oracle_dir, args.budget)
    if problems:
        print("error: missing oracle results for: " + ", ".join(problems), file=sys.stderr)
        return EXIT_BUDGET
    base = SearchParams(seed=args.seed)
    report = bench_mod.run_bench(instances, optima, specs, base, workers=args.workers)
    print(bench_mod.format_table(report))
    out = _out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bench_mod.write_csv(report, out / "bench.csv", out / "bench_details.csv")
    return EXIT_OK


def cmd_plot(args) -> int:
    trace = read_trace(args.trace)
    if args.data:
        with open(args.data, "w") as fh:
            fh.write("# iter f violation\n")
            for r in trace:
                fh.write(f"{r.iteration} {r.f} {r.violation}\n")
    if args.out:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(8, 5))
        its = [r.iteration for r in trace]
        top.plot(its, [r.f for r in trace], lw=1)
        top.set_ylabel("f(x)")
        bottom.plot(its, [r.violation for r in trace], lw=1, color="tab:red")
        bottom.set_ylabel("violation")
        bottom.set_xlabel("iteration")
        fig.tight_layout()
        fig.savefig(args.out)
        plt.close(fig)
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="floorspace", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate spanner instances")
    g.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    g.add_argument("--seeds", default="1-100", help="e.g. 1-100 or 3,5,8")
    g.add_argument("--pws", type=int)
    g.add_argument("--categories", type=_int_tuple, help="per PW, comma separated or one value")
    g.add_argument("--options", type=_int_tuple, help="per category, comma separated or one value")
    g.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run the tabu search on one instance")
    s.add_argument("instance")
    s.add_argument("--out", help="solution file")
    s.add_argument("--trace", help="write the per-iteration trace CSV here")
    d = SearchParams()
    s.add_argument("--iters", type=int, default=d.iterations, help="total iterations (T0)")
    s.add_argument("--stage1", type=int, default=d.stage1, help="first-stage length (T1)")
    s.add_argument("--t3", type=int, default=d.no_improve, help="stagnation trigger for levels 4/5")
    s.add_argument("--t4", type=int, default=d.max_high_run, help="max consecutive high-level iterations")
    s.add_argument("--t5", type=int, default=d.forced_low, help="forced low-level span")
    s.add_argument("--t6", type=int, default=None, help="feasible-best stagnation cutoff (default 0.8*iters)")
    s.add_argument("--t7", type=int, default=d.warmup, help="statistics warm-up before candidate lists")
    s.add_argument("--p-low", type=float, nargs=3, default=d.p_low, metavar=("P1", "P2", "P3"))
    s.add_argument("--p-high", type=float, nargs=2, default=d.p_high, metavar=("P4", "P5"))
    s.add_argument("--r1", type=float, default=d.r1)
    s.add_argument("--r2", type=float, default=d.r2)
    s.add_argument("--penalty", type=int, default=None, help="override the instance penalty")
    s.add_argument("--seed", type=int, default=d.seed)
    s.add_argument("--no-candidate-list", action="store_true")
    s.add_argument("--levels", type=_int_tuple, default=None, help="single level to use exclusively")
    s.add_argument("--tenure", default="default", help="default | none | midpoint | fixed:N")
    s.add_argument("--init", choices=["ll", "hr", "bal"], default="bal")
    s.add_argument("--first-improvement-levels", type=_int_tuple, default=d.first_improvement_levels)
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="exact optimum by enumeration; optional LP export")
    o.add_argument("instance")
    o.add_argument("--out")
    o.add_argument("--export-lp")
    o.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    o.set_defaults(func=cmd_oracle)

    b = sub.add_parser("bench", help="run variants over a generated suite")
    b.add_argument("manifest")
    b.add_argument("--preset", action="append", default=[], choices=sorted(bench_mod.PRESETS))
    b.add_argument("--run", action="append", default=[], help="LABEL[:key=value,...], e.g. short:iters=300")
    b.add_argument("--oracle-dir", help="read/write <id>.oracle.json results here")
    b.add_argument("--budget", type=int, default=None)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--out", help="directory for bench.csv and bench_details.csv")
    b.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot", help="render a trace CSV")
    p.add_argument("trace")
    p.add_argument("--out", help="image file (png, pdf, ...)")
    p.add_argument("--data", help="whitespace-separated data file for plotting tools")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InstanceError, TraceError, UsageError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
