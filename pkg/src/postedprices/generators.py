"""Seeded random valuations and instances."""

from __future__ import annotations

import itertools

import numpy as np

from .errors import CapabilityError, InputError
from .itemset import MAX_EXHAUSTIVE_ITEMS, MAX_TABLE_ITEMS
from .lowerbound import StackedValuation
from .valuations import (XOS, Additive, Instance, Table, UnitDemand, Valuation,
                         ValuationDistribution, is_subadditive)

FAMILIES = ("additive-iid", "unit-demand", "xos-random", "table-random-subadditive",
            "lowerbound-L")


def cover_table(m: int, sets: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted minimum-cover value of every subset; ``sets`` must cover all items."""
    masks = np.arange(1 << m, dtype=np.int64)
    t = np.full(masks.size, np.inf)
    t[0] = 0.0
    while True:
        new = t.copy()
        for A, w in zip(sets, weights):
            np.minimum(new, w + t[masks & ~int(A)], out=new)
        if np.array_equal(new, t):
            return t
        t = new


def random_cover(m: int, rng: np.random.Generator, n_sets: int | None = None) -> Table:
    """Weighted set-cover valuation: monotone and subadditive, usually not XOS."""
    if m > MAX_TABLE_ITEMS:
        raise CapabilityError(f"cover valuations need m <= {MAX_TABLE_ITEMS}")
    n_sets = n_sets or max(2, m)
    sets = [1 << j for j in range(m)]
    weights = list(rng.uniform(0.6, 1.0, m))
    for _ in range(n_sets):
        size = int(rng.integers(2, max(3, m // 2 + 1)))
        items = rng.choice(m, size=min(size, m), replace=False)
        sets.append(int(sum(1 << int(j) for j in items)))
        weights.append(float(rng.uniform(0.8, 1.6)))
    return Table(cover_table(m, np.array(sets), np.array(weights)), m, check=False)


def random_xos(m: int, rng: np.random.Generator, n_clauses: int = 3) -> XOS:
    return XOS(rng.random((n_clauses, m)))


def random_subadditive_table(m: int, rng: np.random.Generator, noise: float = 0.05,
                             max_tries: int = 200) -> Table:
    """Perturbed cover table, resampled until monotone and subadditive."""
    if m > MAX_EXHAUSTIVE_ITEMS:
        raise CapabilityError(f"rejection sampling needs m <= {MAX_EXHAUSTIVE_ITEMS}")
    for _ in range(max_tries):
        base = random_cover(m, rng).table()
        vals = base * (1.0 + noise * rng.random(base.size))
        vals[0] = 0.0
        try:
            cand = Table(vals, m)
        except InputError:
            continue
        if is_subadditive(cand):
            return cand
        noise /= 2
    return random_cover(m, rng)


def random_subadditive(m: int, rng: np.random.Generator) -> Valuation:
    """One draw from a mix of subadditive families."""
    kind = int(rng.integers(3))
    if kind == 0:
        return random_xos(m, rng, int(rng.integers(2, 5)))
    if kind == 1:
        return random_cover(m, rng)
    return Table(0.5 * random_cover(m, rng).table() + 0.5 * random_xos(m, rng).table(), m,
                 check=False)


def _family_valuation(family: str, m: int, rng: np.random.Generator) -> Valuation:
    if family == "additive-iid":
        return Additive(rng.random(m))
    if family == "unit-demand":
        return UnitDemand(rng.random(m))
    if family == "xos-random":
        return random_xos(m, rng, int(rng.integers(2, 5)))
    if family == "table-random-subadditive":
        return random_subadditive_table(m, rng)
    raise InputError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")


def gen_instance(family: str, m: int, n: int, support: int = 2, seed: int = 0,
                 L: int = 1) -> Instance:
    """Deterministic random instance for a named family.

    ``lowerbound-L`` ignores ``m``, ``n`` and ``support`` and returns the
    single-agent stacked valuation with parameter ``L``.
    """
    if family == "lowerbound-L":
        return Instance.deterministic([StackedValuation(L)])
    if m < 1 or n < 1 or support < 1:
        raise InputError("gen_instance needs m, n, support >= 1")
    rng = np.random.default_rng(seed)
    agents = []
    for _ in range(n):
        w = rng.random(support) + 0.1
        w = w / w.sum()
        agents.append(ValuationDistribution(
            [(float(p), _family_valuation(family, m, rng)) for p in w]))
    return Instance(m, agents)


def independent_items_distribution(m: int, rng: np.random.Generator, kind: str = "additive"
                                   ) -> ValuationDistribution:
    """Item values drawn independently from two-point laws, combined by ``kind``.

    ``kind`` is ``additive``, ``unit_demand`` or ``xos`` (the max of two fixed
    reweightings of the value vector).  Support size ``2^m``.
    """
    lo = rng.uniform(0.0, 1.0, m)
    hi = lo + rng.uniform(0.2, 1.5, m)
    pr = rng.uniform(0.2, 0.8, m)
    mix = rng.uniform(0.3, 1.2, (2, m))
    support = []
    for bits in itertools.product((0, 1), repeat=m):
        b = np.array(bits, dtype=bool)
        x = np.where(b, hi, lo)
        p = float(np.prod(np.where(b, pr, 1 - pr)))
        if kind == "additive":
            v: Valuation = Additive(x)
        elif kind == "unit_demand":
            v = UnitDemand(x)
        elif kind == "xos":
            v = XOS(x * mix)
        else:
            raise InputError(f"unknown independent-items kind {kind!r}")
        support.append((p, v))
    return ValuationDistribution(support)
