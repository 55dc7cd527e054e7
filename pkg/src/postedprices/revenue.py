"""Revenue side: core thresholds, anonymous prices with entry fees, and
sequential posted prices.

Notation per agent ``i`` with singleton thresholds ``β_i``:

* ``c_i``: smallest ``x >= 0`` with ``sum_j Pr[v_i(j) >= β_ij + x] <= 1/2``
* core set ``C_i(v) = {j : v(j) < β_ij + c_i}`` and ``v'(S) = v(S ∩ C_i(v))``
* ``τ_i``: smallest ``x >= 0`` with ``sum_j Pr[v_i(j) >= max(β_ij, p_j + x)] <= 1/2``
* ``Y_i(v) = {j : v(j) < p_j + τ_i}`` and ``v̂(S) = v(S ∩ Y_i(v))``
* surplus ``μ_i(v, S) = max_{S' ⊆ S} v̂(S') - p(S')``

Infima are over the scan of critical points; probabilities are step
functions, so the infimum is a critical point or zero even when it is not
attained.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InputError
from .itemset import TOL, ItemSet, SetDistribution, as_mask, bit_matrix, check_table_size, set_sums
from .mechsim import MechanismRun
from .valuations import (Instance, Table, Valuation, ValuationDistribution, as_prices,
                         iter_profiles)


def _singletons(D: ValuationDistribution) -> tuple[np.ndarray, np.ndarray]:
    return D.singleton_values(), D.probs


def _infimum(candidates: Sequence[float], upper_tail) -> float:
    """Smallest candidate ``x`` with ``upper_tail(x) <= 1/2``.

    ``upper_tail(x)`` is the value of the non-increasing step function just
    to the right of ``x``; zero is tested with the closed tail.
    """
    for x in sorted(set(candidates)):
        if upper_tail(x) <= 0.5 + TOL:
            return float(x)
    raise InputError("threshold scan found no feasible point")


def core_threshold(D: ValuationDistribution, beta) -> float:
    """``c_i`` for one agent."""
    vals, probs = _singletons(D)
    beta = np.asarray(beta, dtype=float)

    excess = vals - beta

    def tail(x: float, strict: bool) -> float:
        hit = excess > x if strict else excess >= x
        return float(probs @ hit.sum(axis=1))

    if tail(0.0, False) <= 0.5 + TOL:
        return 0.0
    crit = [0.0, *[float(x) for x in excess.ravel() if x >= 0]]
    return _infimum(crit, lambda x: tail(x, True))


def tau_threshold(D: ValuationDistribution, prices, beta) -> float:
    """``τ_i`` for one agent at prices ``p``."""
    vals, probs = _singletons(D)
    p = as_prices(prices, D.m)
    beta = np.asarray(beta, dtype=float)
    above_beta = vals >= beta

    diffs = vals - p

    def tail(x: float, strict: bool) -> float:
        hit = above_beta & ((diffs > x) if strict else (diffs >= x))
        return float(probs @ hit.sum(axis=1))

    if tail(0.0, False) <= 0.5 + TOL:
        return 0.0
    crit = [0.0, *[float(x) for x in diffs[above_beta & np.isfinite(diffs)] if x >= 0]]
    return _infimum(crit, lambda x: tail(x, True))


tau = tau_threshold


def core_restrict(v: Valuation, beta, c: float) -> Table:
    """``v'(S) = v(S ∩ C)`` with ``C = {j : v(j) < β_j + c}``."""
    C = sum(1 << j for j, (x, b) in enumerate(zip(v.singletons(), beta)) if x < b + c)
    return _restrict(v, C)


def hat_restrict(v: Valuation, prices, tau: float) -> Table:
    """``v̂(S) = v(S ∩ Y)`` with ``Y = {j : v(j) < p_j + τ}``."""
    p = as_prices(prices, v.m)
    Y = sum(1 << j for j, (x, pj) in enumerate(zip(v.singletons(), p)) if x < pj + tau)
    return _restrict(v, Y)


def _restrict(v: Valuation, keep: int) -> Table:
    check_table_size(v.m)
    masks = np.arange(1 << v.m, dtype=np.int64)
    return Table(v.table()[masks & keep], v.m, check=False)


def surplus_table(vhat: Valuation, prices) -> np.ndarray:
    """``μ(S)`` for every ``S`` via a max-over-subsets transform."""
    p = as_prices(prices, vhat.m)
    util = vhat.table() - set_sums(np.where(np.isfinite(p), p, 0.0))
    if np.any(np.isinf(p)):
        B = bit_matrix(vhat.m)
        util = np.where(B[:, np.isinf(p)].any(axis=1), -np.inf, util)
    mu = util.copy()
    for j in range(vhat.m):
        step = 1 << j
        view = mu.reshape(-1, 2 * step)
        np.maximum(view[:, step:], view[:, :step], out=view[:, step:])
    return np.maximum(mu, 0.0)


def surplus(vhat: Valuation, prices, S) -> float:
    return float(surplus_table(vhat, prices)[as_mask(S, vhat.m)])


class SurplusFunction:
    """``μ_i(v, ·)`` for one agent type, tabulated."""

    def __init__(self, v: Valuation, prices, tau: float) -> None:
        self.v = v
        self.prices = as_prices(prices, v.m)
        self.tau = float(tau)
        self.vhat = hat_restrict(v, self.prices, self.tau)
        self._table = surplus_table(self.vhat, self.prices)

    def __call__(self, S) -> float:
        return float(self._table[as_mask(S, self.v.m)])

    value = __call__

    def table(self) -> np.ndarray:
        return self._table


def lower_median(values: Sequence[float], probs: Sequence[float]) -> float:
    """Smallest ``x`` with ``Pr[X <= x] >= 1/2``."""
    order = np.argsort(values, kind="stable")
    vals = np.asarray(values, dtype=float)[order]
    cum = np.cumsum(np.asarray(probs, dtype=float)[order])
    return float(vals[np.searchsorted(cum, 0.5 - TOL)])


def median_entry_fee(D: ValuationDistribution, prices, S, tau: float) -> float:
    """Lower median of ``μ_i(v_i, S)`` over ``v_i ~ D``."""
    vals = [SurplusFunction(v, prices, tau)(S) for v in D.valuations]
    return lower_median(vals, D.probs)


@dataclass
class Thresholds:
    """Per-agent ``β`` rows and the derived core thresholds ``c``."""

    beta: np.ndarray
    c: np.ndarray
    b: float = 0.5

    @classmethod
    def from_beta(cls, inst: Instance, beta, b: float = 0.5) -> "Thresholds":
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (inst.n, inst.m):
            raise InputError(f"beta must have shape ({inst.n}, {inst.m})")
        c = np.array([core_threshold(D, row) for D, row in zip(inst.agents, beta)])
        return cls(beta, c, float(b))


def core_instance(inst: Instance, beta) -> tuple[Instance, Thresholds]:
    """Instance of core-restricted valuations ``v'`` with the same type probabilities."""
    th = Thresholds.from_beta(inst, beta)
    agents = [ValuationDistribution([(p, core_restrict(v, th.beta[i], th.c[i])) for p, v in D])
              for i, D in enumerate(inst.agents)]
    return Instance(inst.m, agents, inst.order), th


def item_independence_violations(D: ValuationDistribution, tol: float = 1e-9
                                 ) -> list[tuple[int, int]]:
    """Item pairs whose singleton values are not independent under ``D``."""
    vals, probs = _singletons(D)
    bad = []
    for j in range(D.m):
        for k in range(j + 1, D.m):
            for a in np.unique(vals[:, j]):
                for b in np.unique(vals[:, k]):
                    pa = probs[vals[:, j] == a].sum()
                    pb = probs[vals[:, k] == b].sum()
                    pab = probs[(vals[:, j] == a) & (vals[:, k] == b)].sum()
                    if abs(pab - pa * pb) > tol:
                        bad.append((j, k))
                        break
                else:
                    continue
                break
    return bad


def _warn_dependence(inst: Instance) -> None:
    for i, D in enumerate(inst.agents):
        if item_independence_violations(D):
            warnings.warn(f"agent {i}: singleton values are not independent across items; "
                          "the entry-fee concentration bound assumes they are",
                          RuntimeWarning, stacklevel=3)


@dataclass
class AspeRun(MechanismRun):
    fees: np.ndarray = field(default_factory=lambda: np.zeros(0))
    item_revenue: float = 0.0
    fee_revenue: float = 0.0
    surpluses: np.ndarray = field(default_factory=lambda: np.zeros(0))
    offered: tuple[ItemSet, ...] = ()


class _AspeTables:
    """Per-agent surplus tables and cached entry fees for one price vector."""

    def __init__(self, inst: Instance, prices, beta) -> None:
        self.p = as_prices(prices, inst.m)
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (inst.n, inst.m):
            raise InputError(f"beta must have shape ({inst.n}, {inst.m})")
        self.tau = np.array([tau_threshold(D, self.p, row) for D, row in zip(inst.agents, beta)])
        self.funcs = [[SurplusFunction(v, self.p, self.tau[i]) for v in D.valuations]
                      for i, D in enumerate(inst.agents)]
        self.stacked = [np.array([f.table() for f in fs]) for fs in self.funcs]
        self.inst = inst
        self._fees: dict[tuple[int, int], float] = {}

    def fee(self, i: int, S: int) -> float:
        key = (i, S)
        if key not in self._fees:
            self._fees[key] = lower_median(self.stacked[i][:, S], self.inst.agents[i].probs)
        return self._fees[key]


def _aspe_profile(tabs: _AspeTables, idx: Sequence[int], order: tuple[int, ...]) -> AspeRun:
    from .valuations import demand

    inst, p = tabs.inst, tabs.p
    m, n = inst.m, inst.n
    remaining = (1 << m) - 1
    alloc = [ItemSet(0, m)] * n
    offered = [ItemSet(0, m)] * n
    util, fees, surp = np.zeros(n), np.zeros(n), np.zeros(n)
    item_rev = fee_rev = welfare = 0.0
    for i in order:
        f = tabs.funcs[i][idx[i]]
        offered[i] = ItemSet(remaining, m)
        mu = float(f.table()[remaining])
        fee = tabs.fee(i, remaining)
        surp[i] = mu
        if mu >= fee - TOL:
            S = demand(f.vhat, p, remaining)
            pay = float(sum(p[j] for j in S))
            val = f.vhat.value(S)
            alloc[i] = S
            fees[i] = fee
            util[i] = val - pay - fee
            item_rev += pay
            fee_rev += fee
            welfare += val
            remaining &= ~S.bits
    sold = ItemSet(((1 << m) - 1) & ~remaining, m)
    return AspeRun(tuple(alloc), util, item_rev + fee_rev, welfare, sold, order,
                   fees, item_rev, fee_rev, surp, tuple(offered))


@dataclass
class RevenueSummary:
    """Expected (or sample-mean) outcome of a revenue mechanism."""

    revenue: float
    welfare: float
    item_revenue: float
    fee_revenue: float
    samples: int
    runs: list = field(default_factory=list, repr=False)


def _rows(inst: Instance, n_samples: int | None, seed):
    if n_samples is None:
        return [(idx, p) for idx, p, _ in iter_profiles(inst)]
    draws = inst.sample_indices(np.random.default_rng(seed), n_samples)
    return [(tuple(int(k) for k in idx), 1.0 / n_samples) for idx in draws]


def run_aspe(inst: Instance, prices, beta, order: Sequence[int] | None = None,
             n_samples: int | None = None, seed=0, keep_runs: bool = False) -> RevenueSummary:
    """Anonymous item prices with per-agent median entry fees.

    The agent facing remaining items ``S`` pays the lower-median fee of
    ``μ_i(·, S)`` when its own surplus reaches it, then buys a bundle
    maximising ``v̂(S') - p(S')``.
    """
    order = inst.resolve_order(order)
    tabs = _AspeTables(inst, prices, beta)
    out = RevenueSummary(0.0, 0.0, 0.0, 0.0, 0)
    for idx, w in _rows(inst, n_samples, seed):
        run = _aspe_profile(tabs, idx, order)
        out.revenue += w * run.revenue
        out.welfare += w * run.welfare
        out.item_revenue += w * run.item_revenue
        out.fee_revenue += w * run.fee_revenue
        out.samples += 1
        if keep_runs:
            out.runs.append((idx, w, run))
    return out


def aspe_profile_run(inst: Instance, prices, beta, idx: Sequence[int],
                     order: Sequence[int] | None = None) -> AspeRun:
    return _aspe_profile(_AspeTables(inst, prices, beta), tuple(idx), inst.resolve_order(order))


def rspm_run(profile: Sequence[Valuation], personal_prices, order: Sequence[int] | None = None
             ) -> MechanismRun:
    """Each buyer takes at most one remaining item, maximising ``v(j) - P_ij > 0``."""
    profile = list(profile)
    m, n = profile[0].m, len(profile)
    P = np.asarray(personal_prices, dtype=float)
    if P.shape != (n, m) or np.any(np.isnan(P)) or np.any(P < 0):
        raise InputError(f"personal prices must be a non-negative ({n}, {m}) array")
    order = tuple(range(n)) if order is None else tuple(order)
    remaining = (1 << m) - 1
    alloc = [ItemSet(0, m)] * n
    util = np.zeros(n)
    rev = welfare = 0.0
    for i in order:
        vals = profile[i].singletons()
        best, gain = -1, 0.0
        for j in range(m):
            if remaining >> j & 1:
                g = vals[j] - P[i, j]
                if g > gain + TOL:
                    best, gain = j, g
        if best >= 0:
            alloc[i] = ItemSet(1 << best, m)
            util[i] = gain
            rev += P[i, best]
            welfare += vals[best]
            remaining &= ~(1 << best)
    return MechanismRun(tuple(alloc), util, rev, welfare,
                        ItemSet(((1 << m) - 1) & ~remaining, m), order)


def run_rspm(inst: Instance, personal_prices, order: Sequence[int] | None = None,
             n_samples: int | None = None, seed=0, keep_runs: bool = False) -> RevenueSummary:
    order = inst.resolve_order(order)
    out = RevenueSummary(0.0, 0.0, 0.0, 0.0, 0)
    for idx, w in _rows(inst, n_samples, seed):
        run = rspm_run(inst.profile(idx), personal_prices, order)
        out.revenue += w * run.revenue
        out.item_revenue += w * run.revenue
        out.welfare += w * run.welfare
        out.samples += 1
        if keep_runs:
            out.runs.append((idx, w, run))
    return out


@dataclass
class EntryFeeBound:
    fee_revenue: float
    surplus_sum: float
    tau_sum: float

    @property
    def bound(self) -> float:
        return 0.25 * self.surplus_sum - 0.625 * self.tau_sum

    @property
    def slack(self) -> float:
        return self.fee_revenue - self.bound


def entry_fee_bound_check(inst: Instance, prices, beta, order: Sequence[int] | None = None,
                          warn: bool = True) -> EntryFeeBound:
    """Exact ``E[fee revenue] - (1/4 sum_i E μ_i(v_i, S_i) - 5/8 sum_i τ_i)``."""
    if warn:
        _warn_dependence(inst)
    order = inst.resolve_order(order)
    tabs = _AspeTables(inst, prices, beta)
    fee_rev = surplus_sum = 0.0
    for idx, w in _rows(inst, None, 0):
        run = _aspe_profile(tabs, idx, order)
        fee_rev += w * run.fee_revenue
        surplus_sum += w * float(run.surpluses.sum())
    return EntryFeeBound(fee_rev, surplus_sum, float(tabs.tau.sum()))


def tradeoff_constant(b):
    """``(1/4) * 2b(1-b) / (8b - 2b^2 + 1)``; exact for :class:`Fraction` input."""
    if not 0 < b < 1:
        raise InputError("tradeoff constant needs 0 < b < 1")
    quarter = Fraction(1, 4) if isinstance(b, Fraction) else 0.25
    return quarter * (2 * b * (1 - b)) / (8 * b - 2 * b * b + 1)


@dataclass
class InterimAllocation:
    """``σ[i][s]`` maps masks to the probability agent ``i`` of type ``s`` gets them."""

    m: int
    sigma: list[list[dict[int, float]]]

    @property
    def pi(self) -> list[np.ndarray]:
        out = []
        for rows in self.sigma:
            arr = np.zeros((len(rows), self.m))
            for s, dist in enumerate(rows):
                for S, w in dist.items():
                    for j in range(self.m):
                        if S >> j & 1:
                            arr[s, j] += w
            out.append(arr)
        return out

    def lottery(self, i: int, s: int) -> SetDistribution:
        return SetDistribution.from_weights(list(self.sigma[i][s]), list(self.sigma[i][s].values()),
                                            self.m)


def interim_allocation(inst: Instance, prices, order: Sequence[int] | None = None
                       ) -> InterimAllocation:
    """Interim allocation rule of the posted-price mechanism."""
    from .mechsim import run_posted_price

    order = inst.resolve_order(order)
    sigma = [[{} for _ in D.valuations] for D in inst.agents]
    for idx, pr, prof in iter_profiles(inst):
        run = run_posted_price(prof, prices, order)
        for i, S in enumerate(run.allocation):
            s = idx[i]
            w = pr / inst.agents[i].probs[s]
            sigma[i][s][S.bits] = sigma[i][s].get(S.bits, 0.0) + w
    return InterimAllocation(inst.m, sigma)


@dataclass
class PropertyReport:
    """Slacks of the threshold properties (non-negative means satisfied)."""

    competition: np.ndarray
    allocation: list[np.ndarray]

    @property
    def ok(self) -> bool:
        return bool(np.all(self.competition >= -TOL)
                    and all(np.all(a >= -TOL) for a in self.allocation))


def threshold_property_check(inst: Instance, beta, pi: Sequence[np.ndarray], b: float
                             ) -> PropertyReport:
    """``b - sum_{k != i} Pr[v_k(j) >= β_kj]`` and ``Pr[v_i(j) >= β_ij]/b - E π_ij``."""
    beta = np.asarray(beta, dtype=float)
    hit = np.array([D.probs @ (D.singleton_values() >= beta[i]) for i, D in enumerate(inst.agents)])
    competition = b - (hit.sum(axis=0)[None, :] - hit)
    allocation = [hit[i] / b - D.probs @ np.asarray(pi[i]) for i, D in enumerate(inst.agents)]
    return PropertyReport(competition, allocation)


def hat_gap(inst: Instance, beta, prices, lambdas, T) -> float:
    """Raw ``E sum_i sum_S λ (v'_i(S \\ T) - v̂_i(S \\ T))`` for one removal set."""
    core, th = core_instance(inst, beta)
    p = as_prices(prices, inst.m)
    tau = [tau_threshold(D, p, row) for D, row in zip(inst.agents, th.beta)]
    T = as_mask(T, inst.m)
    total = 0.0
    for idx, pr, prof in iter_profiles(inst):
        for i, (v, lam) in enumerate(zip(prof, lambdas[idx])):
            vc = core.agents[i].valuations[idx[i]]
            vh = hat_restrict(v, p, tau[i])
            for S, w in zip(lam.masks, lam.probs):
                R = int(S) & ~T
                total += pr * w * (vc.value(R) - vh.value(R))
    return total
