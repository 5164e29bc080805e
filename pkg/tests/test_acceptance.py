"""Suite-level acceptance criteria on 100 desk-profile instances.

Each test appends one PASS/FAIL line that is printed in the session summary.
Search variants are run once per session and shared between criteria.
"""
import random
import time

import pytest

from conftest import ACCEPTANCE_LINES, random_instance, reference_objective
from floorspace.bench import Detail, gap_percent, summarize
from floorspace.generator import PROFILES, generate, generate_suite
from floorspace.model import Solution, dumps_instance, initial_solution, is_feasible
from floorspace.moves import Neighborhood, delta_evaluate
from floorspace.oracle import brute_force, choice_from_values, export_mip
from floorspace.search import SearchParams, check_trace, run

pytestmark = pytest.mark.acceptance

SEEDS = range(1, 101)
_variants: dict = {}


def report(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"C{criterion} {'PASS' if ok else 'FAIL'} {detail}")


@pytest.fixture(scope="session")
def suite():
    return generate_suite(PROFILES["desk"], SEEDS)


@pytest.fixture(scope="session")
def optima(suite):
    out = {}
    for inst in suite:
        res = brute_force(inst)
        assert res.feasible, inst.id
        out[inst.id] = res.revenue
    return out


def variant(label, suite, optima, **kw):
    """Run one parameter variant over the suite (cached); returns (results, row, seconds)."""
    if label not in _variants:
        params = SearchParams(**kw)
        results, details = [], []
        started = time.perf_counter()
        for inst in suite:
            t0 = time.perf_counter()
            res = run(inst, params)
            secs = time.perf_counter() - t0
            gap = gap_percent(optima[inst.id], res.best_f) if res.feasible else None
            details.append(Detail(label, inst.id, res.best_f, optima[inst.id], gap, res.feasible, secs,
                                  res.evaluations, res.iterations))
            results.append(res)
        _variants[label] = (params, results, summarize(label, details), time.perf_counter() - started)
    return _variants[label]


def test_c1_delta_exactness():
    rng = random.Random(2024)
    started = time.perf_counter()
    samples = mismatches = 0
    per_level = dict.fromkeys(range(1, 6), 0)
    while samples < 10_000:
        inst = random_instance(rng, max_pws=3, max_cats=4, max_opts=4)
        nb = Neighborhood(inst)
        for _ in range(10):
            choice = [rng.randrange(len(c.options)) for c in inst.categories]
            sol = Solution.from_choice(inst, choice)
            before = reference_objective(inst, choice)[2]
            for level in range(1, 6):
                blocks = [b for b in nb.blocks(level, sol) if b.size]
                if not blocks:
                    continue
                block = rng.choice(blocks)
                mv = block.move(rng.randrange(block.size), choice)
                after = list(choice)
                for ch in mv.changes:
                    after[ch.category] = ch.new
                expected = reference_objective(inst, after)[2] - before
                if mv.delta_f != expected or delta_evaluate(inst, sol, mv.changes) != expected:
                    mismatches += 1
                samples += 1
                per_level[level] += 1
    elapsed = time.perf_counter() - started
    ok = mismatches == 0 and elapsed < 10 and min(per_level.values()) > 0
    report(1, ok, f"{samples} samples, {mismatches} mismatches, {elapsed:.1f}s, per level {per_level}")
    assert ok


def test_c2_oracle_optimality(suite, optima):
    _, _, row, secs = variant("default", suite, optima)
    ok = row.optnum >= 90 and row.avggap is not None and row.avggap <= 0.25 and row.maxgap <= 1.5 and secs <= 900
    report(2, ok, f"OPTNUM {row.optnum}/100, INFNUM {row.infnum}, AVGGAP {row.avggap:.3f}%, "
                  f"MAXGAP {row.maxgap:.3f}%, {secs:.0f}s")
    assert ok


def test_c3_iteration_budget_trend(suite, optima):
    counts = [variant(f"iters-{n}", suite, optima, iterations=n)[2].optnum for n in (300, 600, 900)]
    counts.append(variant("default", suite, optima)[2].optnum)
    ok = counts == sorted(counts) and counts[-1] - counts[0] >= 10
    report(3, ok, f"OPTNUM for 300/600/900/1200 iterations: {counts}")
    assert ok


def test_c4_single_level_ablation(suite, optima):
    full = variant("default", suite, optima)[2]
    rows = [variant(f"level-{lv}", suite, optima, levels=(lv,))[2] for lv in range(1, 6)]
    ok = all(r.optnum < full.optnum for r in rows) and any(r.infnum >= 1 for r in rows)
    report(4, ok, "level-only OPTNUM/INFNUM " + ", ".join(f"{r.run}: {r.optnum}/{r.infnum}" for r in rows)
           + f" vs full {full.optnum}")
    assert ok


def test_c5_candidate_list_efficiency(suite, optima):
    with_lists = variant("default", suite, optima)[2]
    without = variant("no-cl", suite, optima, candidate_list=False)[2]
    ratio = with_lists.evaluations / without.evaluations
    ok = ratio <= 0.70 and without.optnum - with_lists.optnum <= 10
    report(5, ok, f"evaluations {with_lists.evaluations} vs {without.evaluations} ({ratio:.1%}), "
                  f"OPTNUM {with_lists.optnum} vs {without.optnum}")
    assert ok


def test_c6_tabu_memory_ablation(suite, optima):
    full = variant("default", suite, optima)[2]
    none = variant("tenure-none", suite, optima, tenure="none")[2]
    ok = none.optnum < full.optnum
    report(6, ok, f"OPTNUM without tabu memory {none.optnum} vs {full.optnum}")
    assert ok


def test_c7_trace_compliance(suite, optima):
    params, results, _, _ = variant("default", suite, optima)
    problems = {inst.id: check_trace(res.trace, params) for inst, res in zip(suite, results)}
    bad = {k: v for k, v in problems.items() if v}
    ok = not bad
    report(7, ok, f"{len(results) - len(bad)}/{len(results)} traces clean"
                  + (f"; first: {next(iter(bad.items()))}" if bad else ""))
    assert ok


def test_c8_generator_validity(suite):
    feasible = sum(is_feasible(i, Solution.from_choice(i, i.provenance["base_assignment"])) for i in suite)
    band = divisible = True
    for inst in suite:
        spanner = [tuple(p) for p in inst.provenance["spanner"]]
        band &= all(abs(r - length) <= 2 * 10**5 + 1 and length >= 1 and r >= 1 for length, r in spanner)
        counter = 0
        for cat in inst.categories:
            for opt in cat.options:
                length, revenue = spanner[counter % 2]
                alpha, rem = divmod(opt.length, length)
                divisible &= rem == 0 and 1 <= alpha <= 10 and opt.revenue == alpha * revenue
                counter += 1
    identical = all(dumps_instance(generate(PROFILES["desk"].with_seed(s))) == dumps_instance(i)
                    for s, i in zip(SEEDS, suite))
    ok = feasible == 100 and band and divisible and identical
    report(8, ok, f"{feasible}/100 feasible by base assignment, band {band}, multiples {divisible}, "
                  f"byte-identical {identical}")
    assert ok


def test_c9_initial_rules(suite, optima):
    dominated = sum(initial_solution(i, "hr").revenue >= optima[i.id] for i in suite)
    bal = variant("default", suite, optima)[2]
    hr = variant("init-hr", suite, optima, init="hr")[2]
    ok = dominated == 100 and bal.optnum >= hr.optnum
    report(9, ok, f"HighestRevenue start >= optimum on {dominated}/100; OPTNUM Balanced {bal.optnum} "
                  f"vs HighestRevenue {hr.optnum}")
    assert ok


def test_c10_lp_cross_check(suite, optima, tmp_path):
    highspy = pytest.importorskip("highspy")
    matches = 0
    for inst in suite[:10]:
        path = tmp_path / f"{inst.id}.lp"
        export_mip(inst, path)
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("mip_rel_gap", 0.0)
        h.readModel(str(path))
        h.run()
        names = [h.getColName(j)[1] for j in range(h.getNumCol())]
        choice = choice_from_values(inst, dict(zip(names, h.getSolution().col_value)))
        rev, viol, _ = reference_objective(inst, choice)
        matches += viol == 0 and rev == optima[inst.id] and round(h.getInfo().objective_function_value) == rev
    ok = matches == 10
    report(10, ok, f"external LP solve reproduces the oracle optimum on {matches}/10 instances")
    assert ok
