import random

import pytest
from hypothesis import strategies as st

from floorspace.model import make_instance


def reference_objective(instance, choice):
    """(revenue, violation, f) by plain loops over the instance, no caches."""
    revenue = 0
    total = 0
    viol = 0
    flat = 0
    for pw in instance.pws:
        g = 0
        for cat in pw.categories:
            opt = cat.options[choice[flat]]
            g += opt.length
            revenue += opt.revenue
            flat += 1
        total += g
        viol += max(0, pw.lower - g) + max(0, g - pw.upper)
    viol += max(0, instance.store_lower - total) + max(0, total - instance.store_upper)
    return revenue, viol, revenue - instance.penalty * viol


@pytest.fixture
def example():
    """One PW, two categories; [0, 1] is the unique feasible optimum (revenue 300)."""
    return make_instance(
        [(25, 45, [[(10, 100), (20, 180)], [(10, 90), (30, 200)]])],
        store=(25, 45),
        id="example",
    )


def random_instance(rng: random.Random, max_pws=3, max_cats=4, max_opts=4, scale=50):
    pws = []
    for _ in range(rng.randint(1, max_pws)):
        cats = [
            [(rng.randint(1, scale), rng.randint(1, scale * 3)) for _ in range(rng.randint(2, max_opts))]
            for _ in range(rng.randint(1, max_cats))
        ]
        lo_sum = sum(min(o[0] for o in c) for c in cats)
        hi_sum = sum(max(o[0] for o in c) for c in cats)
        ll = rng.randint(lo_sum, hi_sum)
        pws.append((ll, rng.randint(ll, hi_sum + 5), cats))
    lo = sum(p[0] for p in pws)
    hi = sum(p[1] for p in pws)
    ls = rng.randint(max(0, lo - 10), hi)
    return make_instance(pws, store=(ls, rng.randint(ls, hi + 10)), penalty=rng.choice([1, 7, 20000]))


@st.composite
def instances(draw, max_pws=3, max_cats=4, max_opts=4):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_instance(random.Random(seed), max_pws, max_cats, max_opts)


@st.composite
def instance_and_choice(draw, **kw):
    inst = draw(instances(**kw))
    choice = [draw(st.integers(0, len(c.options) - 1)) for c in inst.categories]
    return inst, choice


# one line per acceptance criterion, printed after the test session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
