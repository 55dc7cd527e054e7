"""Sequential posted-price mechanism: single runs, expectations, guarantees."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import InputError
from .itemset import ItemSet, SetDistribution, mask_items
from .valuations import Instance, Valuation, as_prices, demand, iter_profiles
from .welfare_lp import opt_welfare


@dataclass
class MechanismRun:
    allocation: tuple[ItemSet, ...]
    utilities: np.ndarray
    revenue: float
    welfare: float
    sold: ItemSet
    order: tuple[int, ...]

    def accounting_error(self) -> float:
        return abs(self.welfare - (float(self.utilities.sum()) + self.revenue))


def run_posted_price(profile: Sequence[Valuation], prices, order: Sequence[int] | None = None
                     ) -> MechanismRun:
    """Buyers arrive in ``order`` and each takes a demanded bundle of what is left."""
    profile = list(profile)
    m, n = profile[0].m, len(profile)
    p = as_prices(prices, m)
    order = tuple(range(n)) if order is None else tuple(int(i) for i in order)
    if sorted(order) != list(range(n)):
        raise InputError(f"order {order} is not a permutation of the agents")
    remaining = (1 << m) - 1
    alloc = [ItemSet(0, m)] * n
    util = np.zeros(n)
    revenue = welfare = 0.0
    for i in order:
        S = demand(profile[i], p, remaining)
        pay = float(sum(p[j] for j in S))
        val = profile[i].value(S)
        alloc[i] = S
        util[i] = val - pay
        revenue += pay
        welfare += val
        remaining &= ~S.bits
    sold = ItemSet(((1 << m) - 1) & ~remaining, m)
    return MechanismRun(tuple(alloc), util, revenue, welfare, sold, order)


@dataclass
class ExpectedOutcome:
    welfare: float
    revenue: float
    utilities: np.ndarray
    opt: float
    samples: int

    @property
    def ratio(self) -> float:
        if self.welfare <= 0:
            return 1.0 if self.opt <= 0 else float("inf")
        return self.opt / self.welfare


def _opt(inst: Instance, idx: tuple[int, ...]) -> float:
    cache = inst.__dict__.setdefault("_opt_cache", {})
    if idx not in cache:
        cache[idx] = opt_welfare(inst.profile(idx))[0]
    return cache[idx]


def _weighted_profiles(inst: Instance, n_samples: int | None, seed):
    if n_samples is None:
        return [(idx, p) for idx, p, _ in iter_profiles(inst)]
    draws = inst.sample_indices(np.random.default_rng(seed), n_samples)
    return [(tuple(int(k) for k in idx), 1.0 / n_samples) for idx in draws]


def expected_outcome(inst: Instance, prices, order: Sequence[int] | None = None,
                     n_samples: int | None = None, seed=0, with_opt: bool = True
                     ) -> ExpectedOutcome:
    """Exact expectations over the support, or Monte Carlo when ``n_samples`` is set."""
    order = inst.resolve_order(order)
    W = R = O = 0.0
    U = np.zeros(inst.n)
    rows = _weighted_profiles(inst, n_samples, seed)
    for idx, p in rows:
        run = run_posted_price(inst.profile(idx), prices, order)
        W += p * run.welfare
        R += p * run.revenue
        U += p * run.utilities
        if with_opt:
            O += p * _opt(inst, idx)
    return ExpectedOutcome(W, R, U, O, len(rows))


def expected_welfare(inst: Instance, prices, order: Sequence[int] | None = None,
                     n_samples: int | None = None, seed=0) -> float:
    return expected_outcome(inst, prices, order, n_samples, seed, with_opt=False).welfare


def competitive_ratio(inst: Instance, prices, order: Sequence[int] | None = None,
                      n_samples: int | None = None, seed=0) -> float:
    """``E[OPT] / E[ALG]``; infinite when the mechanism earns no welfare."""
    return expected_outcome(inst, prices, order, n_samples, seed).ratio


@dataclass
class UtilityBoundReport:
    utilities: float
    hallucination: float
    opt: float
    sold_price: float
    alpha: float

    @property
    def rhs(self) -> float:
        return self.opt / self.alpha - self.sold_price

    @property
    def slack(self) -> float:
        return self.utilities - self.rhs

    @property
    def hallucination_slack(self) -> float:
        """Realised utility minus the value of buying ``S \\ SOLD(v')`` from ``λ``."""
        return self.utilities - self.hallucination


def verify_utility_bound(inst: Instance, prices, lambdas: Mapping | Sequence[SetDistribution],
                         alpha: float, order: Sequence[int] | None = None) -> UtilityBoundReport:
    """Both sides of ``sum_i E[u_i] >= E[OPT]/α - E_{v'}[p(SOLD(v'))]``, exactly.

    ``lambdas`` maps profile index tuples to per-agent lotteries (a plain list
    is accepted for single-profile instances).  The report also carries the
    intermediate hallucination term
    ``E_{v,v'}[sum_i sum_S λ^{i,v}_S (v_i(S \\ SOLD(v')) - p(S))]``.
    """
    order = inst.resolve_order(order)
    p = as_prices(prices, inst.m)
    profiles = [(idx, pr) for idx, pr, _ in iter_profiles(inst)]
    if not isinstance(lambdas, Mapping):
        if len(profiles) != 1:
            raise InputError("a plain lottery list needs a single-profile instance")
        lambdas = {profiles[0][0]: list(lambdas)}
    sold: dict[int, float] = {}
    util = opt = 0.0
    for idx, pr in profiles:
        run = run_posted_price(inst.profile(idx), p, order)
        sold[run.sold.bits] = sold.get(run.sold.bits, 0.0) + pr
        util += pr * float(run.utilities.sum())
        opt += pr * _opt(inst, idx)
    sold_masks = np.array(list(sold), dtype=np.int64)
    sold_probs = np.array(list(sold.values()))
    sold_price = float(sum(w * sum(p[j] for j in mask_items(int(S)))
                           for S, w in zip(sold_masks, sold_probs)))
    halluc = 0.0
    for idx, pr in profiles:
        for v, lam in zip(inst.profile(idx), lambdas[idx]):
            for S, w in zip(lam.masks, lam.probs):
                S = int(S)
                pS = sum(p[j] for j in mask_items(S))
                kept = sum(sp * v.value(S & ~int(T)) for T, sp in zip(sold_masks, sold_probs))
                halluc += pr * w * (kept - pS)
    return UtilityBoundReport(util, float(halluc), opt, sold_price, float(alpha))
