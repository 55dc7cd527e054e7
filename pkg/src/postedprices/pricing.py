"""Bayesian posted prices from sampled or exact configuration-LP duals.

For a cap ``q`` on the schedule, ``p_j = E_v[q * y_j^v]`` where ``y^v`` is the
item dual of the cap-``q^2`` LP at profile ``v``.  The schedule point maximises
``E f(q) - E f(q^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import InputError
from .game import q_schedule
from .itemset import SetDistribution, bit_matrix, check_table_size, set_sums
from .prices import PriceVector
from .valuations import Instance, iter_profiles
from .welfare_lp import ConfigLpSolution, solve_bayes_config_lp, solve_config_lp

GAP_TIE_TOL = 1e-12


@dataclass(frozen=True)
class SamplingPlan:
    epsilon: float
    zeta: float
    delta: float
    n1: int
    n2: int
    seed: int = 0


def sample_counts(m: int, n: int, epsilon: float, zeta: float, seed: int = 0) -> SamplingPlan:
    """Hoeffding sample sizes with ``δ = ε / (m + mn + 2)``."""
    if m < 1 or n < 1:
        raise InputError("sample_counts needs m >= 1 and n >= 1")
    if not (0 < epsilon and 0 < zeta < 1):
        raise InputError("sample_counts needs epsilon > 0 and 0 < zeta < 1")
    delta = epsilon / (m + m * n + 2)
    N = math.ceil(math.log(2 * m / zeta) / (2 * delta * delta))
    return SamplingPlan(epsilon, zeta, delta, N, N, seed)


class LpCache:
    """Memoised per-profile configuration LPs for one instance.

    Profiles are keyed by their support indices; the LP is a pure function of
    the profile and cap, so repeated draws reuse one solve.
    """

    def __init__(self, inst: Instance, method: str = "auto") -> None:
        self.inst = inst
        self.method = method
        self._store: dict[tuple[tuple[int, ...], float], ConfigLpSolution] = {}

    def solve(self, idx: Sequence[int], q: float) -> ConfigLpSolution:
        key = (tuple(int(k) for k in idx), float(q))
        sol = self._store.get(key)
        if sol is None:
            sol = solve_config_lp(self.inst.profile(key[0]), q, self.method)
            self._store[key] = sol
        return sol

    def __len__(self) -> int:
        return len(self._store)


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _caps_needed(schedule: Sequence[float]) -> list[float]:
    return sorted({*schedule, *(q * q for q in schedule)}, reverse=True)


def estimate_f(inst: Instance, q: float, n_samples: int, seed=0,
               cache: LpCache | None = None) -> float:
    """Sample mean of ``f^v(q)`` over ``n_samples`` seeded profile draws."""
    if n_samples < 1:
        raise InputError("estimate_f needs at least one sample")
    cache = cache or LpCache(inst)
    draws = inst.sample_indices(_rng(seed), n_samples)
    return float(np.mean([cache.solve(idx, q).objective for idx in draws]))


def choose_q(f_hat: Mapping[float, float], schedule: Sequence[float]) -> float:
    """Schedule point maximising ``f(q) - f(q^2)``; ties go to the smaller ``q``."""
    best_q, best_gap = None, -math.inf
    for q in sorted(schedule):
        try:
            gap = f_hat[q] - f_hat[q * q]
        except KeyError as exc:
            raise InputError(f"missing estimate for cap {exc.args[0]}") from None
        if gap > best_gap + GAP_TIE_TOL * max(1.0, abs(gap)):
            best_q, best_gap = q, gap
    if best_q is None:
        raise InputError("empty q schedule")
    return best_q


def compute_prices(inst: Instance, plan: SamplingPlan,
                   cache: LpCache | None = None) -> tuple[PriceVector, dict]:
    """Sampling-based prices.

    Stage one estimates ``f`` at every schedule point and its square from
    ``plan.n1`` shared draws; stage two averages ``q * y`` over ``plan.n2``
    fresh draws at the chosen cap.  The LP is positively homogeneous, so the
    error budget ``δ`` scales with :meth:`Instance.value_scale`.
    """
    cache = cache or LpCache(inst)
    schedule = q_schedule(inst.m)
    s1, s2 = np.random.SeedSequence(plan.seed).spawn(2)
    f_hat = {q: estimate_f(inst, q, plan.n1, s1, cache) for q in _caps_needed(schedule)}
    q = choose_q(f_hat, schedule)
    draws = inst.sample_indices(_rng(s2), plan.n2)
    ys = np.array([cache.solve(idx, q * q).y for idx in draws])
    prices = q * ys.mean(axis=0)
    scale = inst.value_scale()
    diag = {"q": q, "f_hat": f_hat, "scale": scale, "delta": plan.delta,
            "price_tolerance": plan.delta * scale, "n1": plan.n1, "n2": plan.n2,
            "seed": plan.seed, "schedule": schedule, "lp_solves": len(cache)}
    return PriceVector(prices), diag


@dataclass
class ExactPrices:
    """Exact-expectation prices with the lotteries used by the guarantee."""

    prices: PriceVector
    q: float
    expected_f: dict[float, float]
    lambdas: dict[tuple[int, ...], list[SetDistribution]]
    profiles: list[tuple[tuple[int, ...], float]]
    mode: str = "uniform"
    extra: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.prices, self.q))

    @property
    def gap(self) -> float:
        return self.expected_f[self.q] - self.expected_f[self.q * self.q]


def compute_prices_exact(inst: Instance, z: Sequence[np.ndarray] | None = None,
                         cache: LpCache | None = None) -> ExactPrices:
    """Prices from exact expectations over the enumerated product support.

    With ``z=None`` every profile gets the uniform per-profile cap LP.  With
    interim caps ``z`` (one ``(support_i, m)`` array per agent) the caps
    become ``q z`` in the Bayesian LP and
    ``p_j = q * sum_{i, v_i} z_ij(v_i) y_ij(v_i)`` from its cap-``q^2 z`` duals.
    """
    schedule = q_schedule(inst.m)
    caps = _caps_needed(schedule)
    if z is None:
        cache = cache or LpCache(inst)
        profiles = [(idx, p) for idx, p, _ in iter_profiles(inst)]
        Ef = {c: float(sum(p * cache.solve(idx, c).objective for idx, p in profiles))
              for c in caps}
        q = choose_q(Ef, schedule)
        prices = q * sum(p * cache.solve(idx, q * q).y for idx, p in profiles)
        lambdas = {idx: cache.solve(idx, q).agent_distributions() for idx, _ in profiles}
        return ExactPrices(PriceVector(prices), q, Ef, lambdas, profiles)
    z = [np.asarray(zi, dtype=float) for zi in z]
    sols = {c: solve_bayes_config_lp(inst, [c * zi for zi in z], "interim") for c in caps}
    Ef = {c: s.objective for c, s in sols.items()}
    q = choose_q(Ef, schedule)
    y2 = sols[q * q].y
    prices = q * sum((zi * yi).sum(axis=0) for zi, yi in zip(z, y2))
    sol = sols[q]
    return ExactPrices(PriceVector(prices), q, Ef, sol.lambdas, sol.profiles, "interim",
                       {"solutions": sols})


def price_inequality_lhs(inst: Instance, prices, lambdas: Mapping, profiles=None) -> np.ndarray:
    """``E_v[sum_i sum_S λ^{i,v}_S (v_i(S \\ T) - p(S))] + p(T)`` for every ``T``."""
    check_table_size(inst.m)
    p = np.asarray(prices, dtype=float)
    pS = set_sums(p)
    allT = np.arange(1 << inst.m, dtype=np.int64)
    out = pS.copy()
    profiles = profiles or [(idx, pr) for idx, pr, _ in iter_profiles(inst)]
    for idx, pr in profiles:
        for v, lam in zip(inst.profile(idx), lambdas[idx]):
            t = v.table()
            for S, w in zip(lam.masks, lam.probs):
                out += pr * w * (t[S & ~allT] - pS[S])
    return out


def interim_marginals(inst: Instance, lambdas: Mapping, profiles=None) -> list[np.ndarray]:
    """``E_{v_-i}[sum_{S ∋ j} λ^{i,v}_S]`` as one ``(support_i, m)`` array per agent."""
    B = bit_matrix(inst.m)
    out = [np.zeros((len(D), inst.m)) for D in inst.agents]
    profiles = profiles or [(idx, pr) for idx, pr, _ in iter_profiles(inst)]
    for idx, pr in profiles:
        for i, lam in enumerate(lambdas[idx]):
            s = idx[i]
            out[i][s] += pr / inst.agents[i].probs[s] * (lam.probs @ B[lam.masks])
    return out
