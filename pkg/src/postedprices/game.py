"""The equal-marginals zero-sum game and complete-information prices.

The protagonist picks a lottery ``λ`` over bundles of ``U`` whose item
marginals are at most ``q``; the antagonist picks ``μ`` with the same
constraint and removes ``T ~ μ``.  The payoff is ``E v(S \\ T)``.

Small ground sets solve one LP that dualises the antagonist.  Larger ones
(up to 16 items) use simultaneous row and column generation with exhaustive,
vectorised pricing; both paths close with exact best-response LPs on each
side, which certify the value from above and below.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import sparse

from .errors import CapabilityError, InputError, NumericError
from .itemset import (MAX_TABLE_ITEMS, TOL, ItemSet, SetDistribution, as_mask, bit_matrix,
                      compress_mask, expand_masks, mask_items, set_sums)
from .lp import maximize
from .prices import PriceVector
from .valuations import Valuation
from .welfare_lp import opt_welfare

DENSE_GAME_ITEMS = 8
KEY_LEMMA_TOL = 1e-7


def q_schedule(m: int) -> list[float]:
    """``2^{-2^X}`` for ``X = 0..ceil(log2 log2 m)``; ``[1/2]`` when ``m <= 2``."""
    if m < 1:
        raise InputError("q schedule needs m >= 1")
    top = 0
    while 2 ** (2 ** top) < m:
        top += 1
    return [2.0 ** -(2 ** X) for X in range(top + 1)]


def schedule_bound(m: int) -> float:
    """``(1/(ℓ+1)) (1/2 - 1/m)`` for the schedule of ``m`` items."""
    return (0.5 - 1.0 / m) / len(q_schedule(m))


def local_table(v: Valuation, U: "ItemSet | int | None" = None) -> tuple[np.ndarray, int, int]:
    """Value table of ``v`` over subsets of ``U`` in compressed coordinates."""
    if v.m > MAX_TABLE_ITEMS:
        raise CapabilityError(f"game routines need m <= {MAX_TABLE_ITEMS}")
    U = (1 << v.m) - 1 if U is None else as_mask(U, v.m)
    k = U.bit_count()
    full = expand_masks(np.arange(1 << k, dtype=np.int64), U)
    return v.table()[full], k, U


@lru_cache(maxsize=None)
def _incidence(k: int) -> sparse.csr_matrix:
    return sparse.csr_matrix(bit_matrix(k).T)


def _cap_vector(q, k: int) -> np.ndarray:
    qv = np.broadcast_to(np.asarray(q, dtype=float), (k,)).copy()
    if np.any(qv < -TOL) or np.any(qv > 1 + TOL):
        raise InputError("marginal caps must lie in [0, 1]")
    return np.clip(qv, 0.0, 1.0)


def _lottery_lp(coef: np.ndarray, qv: np.ndarray, k: int, sign: float, batch: int = 16):
    """Optimise ``sign * sum_S x_S coef_S`` over lotteries with marginals ``<= qv``.

    Returns the value and a dense weight vector.  Beyond 256 bundles the LP is
    solved by column generation; pricing scans every bundle.
    """
    N = coef.size
    obj = sign * coef
    if N <= 256:
        res = maximize(obj, A_ub=_incidence(k), b_ub=qv, A_eq=np.ones((1, N)), b_eq=[1.0],
                       what="best-response LP")
        return sign * res.objective, res.x
    B = bit_matrix(k)
    cols = sorted({0, *(1 << j for j in range(k)), *np.argsort(-obj)[:batch].tolist()})
    for _ in range(10 * N):
        A = B[cols].T
        res = maximize(obj[cols], A_ub=A, b_ub=qv, A_eq=np.ones((1, len(cols))), b_eq=[1.0],
                       what="best-response LP")
        rc = obj - B @ res.ineq_duals - res.eq_duals[0]
        rc[cols] = -np.inf
        new = np.flatnonzero(rc > TOL)
        if new.size == 0:
            x = np.zeros(N)
            x[cols] = res.x
            return sign * res.objective, x
        new = new[np.argsort(-rc[new], kind="stable")[:batch]]
        cols = sorted(set(cols) | set(new.tolist()))
    raise NumericError("best-response column generation did not converge")


def removal_values(tU: np.ndarray, masks: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """``c_T = sum_S λ_S v(S \\ T)`` for every ``T``."""
    allT = np.arange(tU.size, dtype=np.int64)
    out = np.zeros(tU.size)
    for S, w in zip(masks, probs):
        out += w * tU[S & ~allT]
    return out


def kept_values(tU: np.ndarray, masks: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """``d_S = sum_T μ_T v(S \\ T)`` for every ``S``."""
    allS = np.arange(tU.size, dtype=np.int64)
    out = np.zeros(tU.size)
    for T, w in zip(masks, probs):
        out += w * tU[allS & ~T]
    return out


def _to_dist(x: np.ndarray, local: np.ndarray, U: int, m: int) -> SetDistribution:
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    keep = x > 1e-12
    w = x[keep] / x[keep].sum()
    return SetDistribution(zip(expand_masks(np.asarray(local)[keep], U).tolist(), w), m, tol=1e-6)


def _local_atoms(d: SetDistribution, U: int) -> tuple[np.ndarray, np.ndarray]:
    if np.any(d.masks & ~U):
        raise InputError("lottery uses items outside the game's ground set")
    return np.array([compress_mask(int(S), U) for S in d.masks], dtype=np.int64), d.probs


def antagonist_value(v: Valuation, lam: SetDistribution, q, U=None) -> tuple[float, SetDistribution]:
    """``min_{μ ∈ Δ(q)} payoff(λ, μ)`` and a minimiser."""
    tU, k, U = local_table(v, U)
    c = removal_values(tU, *_local_atoms(lam, U))
    val, x = _lottery_lp(c, _cap_vector(q, k), k, -1.0)
    return val, _to_dist(x, np.arange(1 << k), U, v.m)


def protagonist_value(v: Valuation, mu: SetDistribution, q, U=None) -> tuple[float, SetDistribution]:
    """``max_{λ ∈ Δ(q)} payoff(λ, μ)`` and a maximiser."""
    tU, k, U = local_table(v, U)
    d = kept_values(tU, *_local_atoms(mu, U))
    val, x = _lottery_lp(d, _cap_vector(q, k), k, 1.0)
    return val, _to_dist(x, np.arange(1 << k), U, v.m)


def payoff(v: Valuation, lam: SetDistribution, mu: SetDistribution) -> float:
    """``sum_{S,T} λ_S μ_T v(S \\ T)``."""
    t = v.table() if v.m <= MAX_TABLE_ITEMS else None
    total = 0.0
    for S, a in zip(lam.masks, lam.probs):
        for T, b in zip(mu.masks, mu.probs):
            R = int(S) & ~int(T)
            total += a * b * (t[R] if t is not None else v.value(R))
    return float(total)


@dataclass
class GameResult:
    value: float
    lam: SetDistribution
    mu: SetDistribution
    q: float
    lower: float
    upper: float
    method: str
    iterations: int = 1

    @property
    def certificate_gap(self) -> float:
        return self.upper - self.lower

    def to_dict(self) -> dict:
        return {"q": self.q, "value": self.value, "lower": self.lower, "upper": self.upper,
                "method": self.method, "iterations": self.iterations,
                "lambda": self.lam.to_dict()["atoms"], "mu": self.mu.to_dict()["atoms"]}


def _restricted_game(tU, k, qv, Ssets: list[int], Tsets: list[int]):
    nS, nT = len(Ssets), len(Tsets)
    Sa = np.array(Ssets, dtype=np.int64)
    Ta = np.array(Tsets, dtype=np.int64)
    P = tU[Sa[None, :] & ~Ta[:, None]]              # (nT, nS)
    B = bit_matrix(k)
    # variables: λ (nS), z (k), θ
    c = np.concatenate([np.zeros(nS), -qv, [1.0]])
    A_marg = np.hstack([B[Sa].T, np.zeros((k, k + 1))])
    A_T = np.hstack([-P, -B[Ta], np.ones((nT, 1))])
    A_ub = np.vstack([A_marg, A_T])
    b_ub = np.concatenate([qv, np.zeros(nT)])
    A_eq = np.concatenate([np.ones(nS), np.zeros(k + 1)])[None, :]
    bounds = [(0, None)] * (nS + k) + [(None, None)]
    res = maximize(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0], bounds=bounds,
                   what="game LP")
    lam = res.x[:nS]
    z = res.x[nS:nS + k]
    theta = res.x[-1]
    w = res.ineq_duals[:k]
    mu = res.ineq_duals[k:]
    pi = res.eq_duals[0]
    return res.objective, lam, z, theta, w, mu, pi


def game_value(v: Valuation, U: "ItemSet | int | None" = None, q: float = 0.5,
               method: str = "auto", max_iter: int = 500, batch: int = 8) -> GameResult:
    """Value ``g(q)`` of the game on ground set ``U`` with optimal strategies.

    ``method`` is ``"dense"`` (one LP with every bundle and every removal set),
    ``"generation"`` (row and column generation) or ``"auto"``.
    """
    tU, k, U = local_table(v, U)
    qv = _cap_vector(q, k)
    N = 1 << k
    if method == "auto":
        method = "dense" if k <= DENSE_GAME_ITEMS else "generation"
    if method == "dense":
        if k > 12:
            raise CapabilityError("dense game LP needs |U| <= 12")
        Ssets = Tsets = list(range(N))
        val, lam, z, theta, w, mu, pi = _restricted_game(tU, k, qv, Ssets, Tsets)
        iters = 1
    elif method == "generation":
        Ssets = [0, N - 1] + [1 << j for j in range(k)]
        Tsets = [0] + [1 << j for j in range(k)]
        Ssets, Tsets = sorted(set(Ssets)), sorted(set(Tsets))
        B = bit_matrix(k)
        allm = np.arange(N, dtype=np.int64)
        for iters in range(1, max_iter + 1):
            val, lam, z, theta, w, mu, pi = _restricted_game(tU, k, qv, Ssets, Tsets)
            cT = removal_values(tU, np.array(Ssets)[lam > 1e-13], lam[lam > 1e-13])
            row_viol = theta - B @ z - cT
            row_viol[Tsets] = -np.inf
            dS = kept_values(tU, np.array(Tsets)[mu > 1e-13], mu[mu > 1e-13])
            col_viol = dS - B @ w - pi
            col_viol[Ssets] = -np.inf
            new_T = allm[row_viol > TOL]
            new_S = allm[col_viol > TOL]
            if new_T.size == 0 and new_S.size == 0:
                break
            if new_T.size:
                new_T = new_T[np.argsort(-row_viol[new_T], kind="stable")[:batch]]
                Tsets = sorted(set(Tsets) | set(new_T.tolist()))
            if new_S.size:
                new_S = new_S[np.argsort(-col_viol[new_S], kind="stable")[:batch]]
                Ssets = sorted(set(Ssets) | set(new_S.tolist()))
        else:
            raise NumericError(f"game generation did not converge in {max_iter} rounds")
    else:
        raise InputError(f"unknown game method {method!r}")
    lam_d = _to_dist(lam, np.array(Ssets), U, v.m)
    mu_d = _to_dist(mu, np.array(Tsets), U, v.m)
    lower, _ = antagonist_value(v, lam_d, qv, U)
    upper, _ = protagonist_value(v, mu_d, qv, U)
    if not (lower - 1e-6 <= val <= upper + 1e-6) or upper - lower > 1e-6 * max(1.0, abs(val)):
        raise NumericError(f"game certificates disagree: lower={lower}, value={val}, upper={upper}")
    return GameResult(float(val), lam_d, mu_d, float(np.max(qv)), lower, upper, method, iters)


def key_lemma_slacks(v: Valuation, U: "ItemSet | int", p, lam: SetDistribution,
                     alpha: float) -> np.ndarray:
    """Lemma left side minus ``v(U)/α`` for every ``T ⊆ U`` (compressed masks)."""
    tU, k, U = local_table(v, U)
    pos = mask_items(U)
    p = np.asarray(getattr(p, "values", p), dtype=float)
    p_loc = p[pos] if p.size == v.m else np.asarray(p, dtype=float)
    if np.any(~np.isfinite(p_loc)) or np.any(p_loc < 0):
        raise InputError("key-lemma prices on U must be finite and non-negative")
    masks, probs = _local_atoms(lam, U)
    pS = set_sums(p_loc)
    c = removal_values(tU, masks, probs)
    target = 0.0 if np.isinf(alpha) else tU[-1] / alpha
    return pS + c - float(probs @ pS[masks]) - target


def verify_key_lemma(v: Valuation, U: "ItemSet | int", p, lam: SetDistribution,
                     alpha: float) -> tuple[ItemSet, float]:
    """Worst removal set ``T ⊆ U`` and the slack there (exhaustive)."""
    slack = key_lemma_slacks(v, U, p, lam, alpha)
    t = int(np.argmin(slack))
    U = as_mask(U, v.m)
    return ItemSet(int(expand_masks(np.array([t]), U)[0]), v.m), float(slack[t])


def _slack_lp(tU: np.ndarray, k: int, masks: np.ndarray, probs: np.ndarray):
    """``max_p min_T p(T) + sum_S λ_S (v(S \\ T) - p(S))`` over ``p >= 0``."""
    B = bit_matrix(k)
    pi = probs @ B[masks]
    c = removal_values(tU, masks, probs)
    A = np.hstack([pi[None, :] - B, np.ones((B.shape[0], 1))])
    obj = np.concatenate([np.zeros(k), [1.0]])
    bounds = [(0, None)] * k + [(None, None)]
    res = maximize(obj, A_ub=A, b_ub=c, bounds=bounds, what="price slack LP")
    return res.x[:k], res.objective


@dataclass
class CompleteInfoPrices:
    prices: PriceVector
    lambdas: list[SetDistribution]
    alpha: float
    partition: list[ItemSet]
    q: list[float | None]
    game_values: list[float]
    certified: list[float]

    def __iter__(self):
        return iter((self.prices, self.lambdas, self.alpha))


def complete_info_prices(profile: Sequence[Valuation],
                         schedule: Sequence[float] | None = None) -> CompleteInfoPrices:
    """Prices and lotteries for a known profile.

    Agent ``i`` plays the game on its part ``U_i`` of an optimal allocation at
    the best schedule point.  Prices on ``U_i`` maximise the key-lemma slack for
    the optimal ``λ`` and ``α`` is read off the certified slack.  Items outside
    every ``U_i`` get an infinite price.
    """
    profile = list(profile)
    m = profile[0].m
    schedule = list(q_schedule(m) if schedule is None else schedule)
    _, parts = opt_welfare(profile)
    prices = np.full(m, np.inf)
    lambdas, qs, gvals, certs, alphas = [], [], [], [], []
    for v, Ui in zip(profile, parts):
        vU = v.value(Ui)
        if Ui.bits == 0 or vU <= 0:
            for j in Ui:
                prices[j] = 0.0
            lambdas.append(SetDistribution.point(0, m))
            qs.append(None)
            gvals.append(0.0)
            certs.append(0.0)
            continue
        games = [game_value(v, Ui, q) for q in schedule]
        best = max(range(len(games)), key=lambda t: (games[t].value, -t))
        g = games[best]
        tU, k, U = local_table(v, Ui)
        masks, probs = _local_atoms(g.lam, U)
        p_loc, s_lp = _slack_lp(tU, k, masks, probs)
        if s_lp < g.value - 1e-6:
            raise NumericError(f"price slack {s_lp} below game value {g.value}")
        prices[mask_items(U)] = p_loc
        _, cert = verify_key_lemma(v, Ui, p_loc, g.lam, np.inf)
        if cert <= 0:
            raise NumericError(f"non-positive certified slack {cert}")
        lambdas.append(g.lam)
        qs.append(schedule[best])
        gvals.append(g.value)
        certs.append(cert)
        alphas.append(vU / cert)
    alpha = max(alphas) if alphas else 1.0
    return CompleteInfoPrices(PriceVector(prices), lambdas, alpha, parts, qs, gvals, certs)
