import json

import pytest
from hypothesis import given, settings

from conftest import instance_and_choice, instances, reference_objective
from floorspace.model import (
    InitRule,
    InstanceError,
    Solution,
    SolutionError,
    evaluate,
    initial_solution,
    instance_from_dict,
    instance_to_dict,
    is_feasible,
    load_instance,
    make_instance,
    save_instance,
    solution_from_dict,
    solution_to_dict,
)
from floorspace.oracle import brute_force


def test_feasible_choice(example):
    ev = evaluate(example, Solution.from_choice(example, [0, 1]))
    assert (ev.revenue, ev.violation, ev.f) == (300, 0, 300)
    assert ev.feasible


def test_shortfall_counts_pw_and_store(example):
    # PW short by 5 and store short by 5
    ev = evaluate(example, Solution.from_choice(example, [0, 0]))
    assert (ev.revenue, ev.violation, ev.f) == (190, 10, -199810)
    assert not is_feasible(example, Solution.from_choice(example, [0, 0]))


def test_wide_windows_never_violated():
    cats = [[(3, 5), (9, 1)], [(4, 4), (2, 8), (7, 7)]]
    top = 9 + 7
    inst = make_instance([(0, top, cats)], store=(0, top))
    for a in range(2):
        for b in range(3):
            assert evaluate(inst, Solution.from_choice(inst, [a, b])).violation == 0


def test_forced_single_option():
    inst = make_instance([(7, 7, [[(7, 3)]])], store=(7, 7))
    assert is_feasible(inst, Solution.from_choice(inst, [0]))


def test_bad_option_index(example):
    with pytest.raises(SolutionError):
        Solution.from_choice(example, [0, 2])
    with pytest.raises(SolutionError):
        Solution.from_choice(example, [0])


def test_initial_rules():
    inst = make_instance([(0, 100, [[(10, 100), (20, 180)]])], store=(0, 100))
    assert initial_solution(inst, "ll").choice == [0]
    assert initial_solution(inst, "hr").choice == [1]
    # 100/10 beats 180/20
    assert initial_solution(inst, InitRule.BALANCED).choice == [0]


def test_identical_options_tie_to_first():
    inst = make_instance([(0, 100, [[(5, 9), (5, 9), (5, 9)]])], store=(0, 100))
    for rule in InitRule:
        assert initial_solution(inst, rule).choice == [0]


def test_balanced_ratio_tie_keeps_lower_index():
    inst = make_instance([(0, 100, [[(10, 30), (20, 60), (5, 14)]])], store=(0, 100))
    assert initial_solution(inst, "bal").choice == [0]


def test_empty_structures_rejected():
    with pytest.raises(InstanceError):
        make_instance([(0, 10, [])], store=(0, 10))
    with pytest.raises(InstanceError):
        make_instance([(0, 10, [[]])], store=(0, 10))
    with pytest.raises(InstanceError):
        make_instance([(10, 5, [[(1, 1)]])], store=(0, 10))


@settings(max_examples=200, deadline=None)
@given(instance_and_choice())
def test_evaluate_matches_reference(case):
    inst, choice = case
    sol = Solution.from_choice(inst, choice)
    ev = evaluate(inst, sol)
    assert (ev.revenue, ev.violation, ev.f) == reference_objective(inst, choice)
    assert evaluate(inst, sol) == ev


@settings(max_examples=60, deadline=None)
@given(instances(max_pws=2, max_cats=3, max_opts=3))
def test_highest_revenue_bounds_optimum(inst):
    best = brute_force(inst)
    hr = initial_solution(inst, "hr")
    if best.feasible:
        assert hr.revenue >= best.revenue


@settings(max_examples=100, deadline=None)
@given(instances())
def test_least_length_never_exceeds_upper_limits(inst):
    min_len = [sum(min(o.length for o in c.options) for c in pw.categories) for pw in inst.pws]
    if any(m > pw.upper for m, pw in zip(min_len, inst.pws)) or sum(min_len) > inst.store_upper:
        return
    sol = initial_solution(inst, "ll")
    assert all(g <= pw.upper for g, pw in zip(sol.pw_lengths, inst.pws))
    assert sol.total_length <= inst.store_upper


@settings(max_examples=50, deadline=None)
@given(instances())
def test_instance_round_trip(inst):
    assert instance_from_dict(json.loads(json.dumps(instance_to_dict(inst)))) == inst


def test_instance_file_round_trip(tmp_path, example):
    path = tmp_path / "inst.json"
    save_instance(example, path)
    assert load_instance(path) == example


@pytest.mark.parametrize(
    "mutate, field",
    [
        (lambda d: d["pws"][0].pop("ll"), "pws[0].ll"),
        (lambda d: d["pws"][0]["categories"][1]["options"][0].update(length="x"), "pws[0].categories[1].options[0].length"),
        (lambda d: d.pop("store"), "store"),
    ],
)
def test_malformed_instance_names_field(example, mutate, field):
    data = instance_to_dict(example)
    mutate(data)
    with pytest.raises(InstanceError, match=field.replace("[", r"\[").replace("]", r"\]")):
        instance_from_dict(data)


def test_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(InstanceError):
        load_instance(path)


def test_solution_round_trip(example):
    sol = Solution.from_choice(example, [1, 0])
    data = json.loads(json.dumps(solution_to_dict(example, sol)))
    assert data["schema"] == "floorspace.solution/1"
    assert data["feasible"] is True and data["revenue"] == 270
    assert solution_from_dict(example, data).choice == [1, 0]
