"""Hard instance generator: weakly correlated spanner(2, 10) data.

Two base (length, revenue) pairs are drawn per instance; every planogram
option is one of them scaled by a random multiplier in [1, 10], alternating
between the pairs.  PW and store windows are fixed ratios of the lengths of
a random base assignment, which is therefore always feasible.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .model import DEFAULT_PENALTY, Category, Instance, PlanogramOption, PlanogramWorld


class ConfigError(ValueError):
    pass


def _as_list(value: int | Sequence[int], n: int, what: str) -> list[int]:
    if isinstance(value, int):
        return [value] * n
    value = [int(v) for v in value]
    if len(value) != n:
        raise ConfigError(f"{what}: expected {n} entries, got {len(value)}")
    return value


@dataclass(frozen=True)
class GenConfig:
    """Shape and spanner parameters.

    ``categories_per_pw`` is a constant or one entry per PW;
    ``options_per_category`` is a constant or one entry per category (flat,
    PW order).
    """

    pw_count: int = 3
    categories_per_pw: int | tuple[int, ...] = 5
    options_per_category: int | tuple[int, ...] = 3
    seed: int = 1
    lower_ratio: str = "0.85"
    upper_ratio: str = "1.15"
    value_range: int = 10**7
    band: int = 10**6
    divisor: int = 5
    multiplier: tuple[int, int] = (1, 10)
    penalty: int = DEFAULT_PENALTY
    name: str = "fso"

    def __post_init__(self):
        if self.pw_count < 1:
            raise ConfigError("pw_count must be at least 1")
        cats = self.category_counts()
        if min(cats) < 1:
            raise ConfigError("every PW needs at least one category")
        if min(self.option_counts()) < 2:
            raise ConfigError("every category needs at least 2 options")
        lo, hi = Fraction(self.lower_ratio), Fraction(self.upper_ratio)
        if not (0 < lo <= 1 <= hi):
            raise ConfigError("bound ratios must satisfy 0 < lower <= 1 <= upper")
        if not (1 <= self.multiplier[0] <= self.multiplier[1]):
            raise ConfigError("multiplier range must be positive and ordered")

    def category_counts(self) -> list[int]:
        return _as_list(self.categories_per_pw, self.pw_count, "categories_per_pw")

    def option_counts(self) -> list[int]:
        return _as_list(self.options_per_category, sum(self.category_counts()), "options_per_category")

    def with_seed(self, seed: int) -> "GenConfig":
        return dataclasses.replace(self, seed=seed)


def _full_scale_options() -> tuple[int, ...]:
    # 45 categories carrying 194 options: 14 with five options, the rest four
    return tuple(5 if i % 3 == 0 and i < 42 else 4 for i in range(45))


PROFILES: dict[str, GenConfig] = {
    # 4**12 ~ 1.7e7 assignments: small enough for the exact oracle in seconds
    "desk": GenConfig(pw_count=4, categories_per_pw=3, options_per_category=4, name="desk"),
    "desk-3x5x3": GenConfig(pw_count=3, categories_per_pw=5, options_per_category=3, name="desk3x5"),
    "full": GenConfig(pw_count=9, categories_per_pw=5, options_per_category=_full_scale_options(), name="full"),
}


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def make_spanner(rng: np.random.Generator, config: GenConfig = GenConfig()) -> list[tuple[int, int]]:
    """Two normalized spanner pairs ``(l, r)``; ``r`` is redrawn until positive."""
    pairs = []
    for _ in range(2):
        low = int(rng.integers(1, config.value_range + 1))
        while True:
            rev = int(rng.integers(low - config.band, low + config.band + 1))
            if rev >= 1:
                break
        pairs.append((_ceil_div(low, config.divisor), _ceil_div(rev, config.divisor)))
    return pairs


def gen_option(
    spanner: Sequence[tuple[int, int]], counter: int, rng: np.random.Generator, multiplier: tuple[int, int] = (1, 10)
) -> tuple[int, int]:
    """(length, revenue) of the ``counter``-th option: alternating spanner pair times a multiplier."""
    length, revenue = spanner[counter % 2]
    alpha = int(rng.integers(multiplier[0], multiplier[1] + 1))
    return alpha * length, alpha * revenue


def _floor_ratio(value: int, ratio: Fraction) -> int:
    return (value * ratio.numerator) // ratio.denominator


def _ceil_ratio(value: int, ratio: Fraction) -> int:
    return _ceil_div(value * ratio.numerator, ratio.denominator)


def generate(config: GenConfig) -> Instance:
    rng = np.random.default_rng(config.seed)
    spanner = make_spanner(rng, config)
    cat_counts = config.category_counts()
    opt_counts = config.option_counts()

    counter = 0
    raw: list[list[list[tuple[int, int]]]] = []
    flat = 0
    for n_cats in cat_counts:
        pw = []
        for _ in range(n_cats):
            opts = []
            for _ in range(opt_counts[flat]):
                opts.append(gen_option(spanner, counter, rng, config.multiplier))
                counter += 1
            pw.append(opts)
            flat += 1
        raw.append(pw)

    base = [int(rng.integers(0, m)) for m in opt_counts]

    lo, hi = Fraction(config.lower_ratio), Fraction(config.upper_ratio)
    pws = []
    flat = 0
    total = 0
    for k, pw in enumerate(raw):
        cats = []
        g = 0
        for c, opts in enumerate(pw):
            options = []
            for length, revenue in opts:
                options.append(PlanogramOption(f"k{k + 1}c{c + 1}p{len(options) + 1}", length, revenue))
            g += opts[base[flat]][0]
            cats.append(Category(f"k{k + 1}c{c + 1}", tuple(options), base[flat]))
            flat += 1
        total += g
        pws.append(PlanogramWorld(f"k{k + 1}", _floor_ratio(g, lo), _ceil_ratio(g, hi), tuple(cats)))

    provenance = {
        "generator": "spanner(2,10) weakly correlated",
        "seed": config.seed,
        "spanner": [list(p) for p in spanner],
        "base_assignment": base,
        "bound_ratios": [config.lower_ratio, config.upper_ratio],
    }
    return Instance(
        tuple(pws),
        _floor_ratio(total, lo),
        _ceil_ratio(total, hi),
        penalty=config.penalty,
        id=f"{config.name}-s{config.seed}",
        provenance=provenance,
    )


def generate_suite(config: GenConfig, seeds: Sequence[int]) -> list[Instance]:
    return [generate(config.with_seed(s)) for s in seeds]
