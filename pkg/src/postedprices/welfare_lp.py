"""Configuration LP with per-item caps, its dual, and optimal welfare.

The primal is ``max sum x[i,S] v_i(S)`` subject to item caps
``sum_{i, S ∋ j} x[i,S] <= q_j`` and one unit of mass per agent.  The dual
prices items with ``y`` and agents with ``u``; its feasibility is checked with
the demand oracle, which is also the column-generation pricing step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse

from .errors import CapabilityError, InputError, NumericError
from .itemset import (MAX_EXHAUSTIVE_ITEMS, MAX_TABLE_ITEMS, TOL, ItemSet, SetDistribution,
                      bit_matrix, mask_items, subset_groups)
from .lp import maximize
from .valuations import Instance, Valuation, demand, iter_profiles

DUALITY_TOL = 1e-6
DENSE_COLUMN_LIMIT = 1 << 13


class MarginalCaps:
    """Per-item caps ``q_j`` in ``[0, 1]``."""

    def __init__(self, caps) -> None:
        q = np.asarray(caps, dtype=float).ravel()
        if np.any(~np.isfinite(q)) or np.any(q < 0) or np.any(q > 1 + TOL):
            raise InputError("marginal caps must lie in [0, 1]")
        self.q = np.minimum(q, 1.0)
        self.q.setflags(write=False)

    @classmethod
    def uniform(cls, m: int, q: float) -> "MarginalCaps":
        return cls(np.full(m, float(q)))

    @property
    def m(self) -> int:
        return self.q.size

    def scaled(self, factor: float) -> "MarginalCaps":
        return MarginalCaps(self.q * factor)

    def __repr__(self) -> str:
        return f"MarginalCaps({self.q.tolist()})"


def _caps(caps, m: int) -> np.ndarray:
    if isinstance(caps, MarginalCaps):
        q = caps.q
    elif np.isscalar(caps):
        q = MarginalCaps.uniform(m, float(caps)).q
    else:
        q = MarginalCaps(caps).q
    if q.size != m:
        raise InputError(f"caps have {q.size} entries, expected {m}")
    return q


@dataclass
class ConfigLpSolution:
    """Primal columns, duals and the strong-duality certificate."""

    m: int
    n: int
    columns: list[tuple[int, ItemSet, float]]
    y: np.ndarray
    u: np.ndarray
    objective: float
    dual_objective: float
    method: str
    iterations: int = 1
    caps: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def duality_gap(self) -> float:
        return abs(self.objective - self.dual_objective)

    def agent_distribution(self, i: int) -> SetDistribution:
        cols = [(S.bits, w) for a, S, w in self.columns if a == i]
        return SetDistribution.from_weights([S for S, _ in cols], [w for _, w in cols], self.m)

    def agent_distributions(self) -> list[SetDistribution]:
        return [self.agent_distribution(i) for i in range(self.n)]

    def item_marginals(self) -> np.ndarray:
        out = np.zeros(self.m)
        for _, S, w in self.columns:
            for j in S:
                out[j] += w
        return out

    def to_dict(self) -> dict:
        return {
            "objective": self.objective, "dual_objective": self.dual_objective,
            "duality_gap": self.duality_gap, "method": self.method,
            "iterations": self.iterations, "y": self.y.tolist(), "u": self.u.tolist(),
            "columns": [{"agent": i, "set": list(S), "x": w} for i, S, w in self.columns],
        }


def _restricted_lp(cols: list[tuple[int, int, float]], q: np.ndarray, n: int, m: int):
    """Solve the LP over the given ``(agent, mask, value)`` columns."""
    k = len(cols)
    rows, cidx = [], []
    for c, (i, S, _) in enumerate(cols):
        for j in mask_items(S):
            rows.append(j)
            cidx.append(c)
        rows.append(m + i)
        cidx.append(c)
    A = sparse.csr_matrix((np.ones(len(rows)), (rows, cidx)), shape=(m + n, k))
    b = np.concatenate([q, np.ones(n)])
    obj = np.array([val for _, _, val in cols])
    res = maximize(obj, A_ub=A, b_ub=b, what="configuration LP")
    return res.x, res.ineq_duals[:m], res.ineq_duals[m:], res.objective


def _finish(profile, cols, x, y, u, obj, q, method, iters) -> ConfigLpSolution:
    m, n = profile[0].m, len(profile)
    columns = [(i, ItemSet(S, m), float(w)) for (i, S, _), w in zip(cols, x) if w > 1e-12]
    dual = float(q @ y + u.sum())
    sol = ConfigLpSolution(m, n, columns, y, u, obj, dual, method, iters, q.copy())
    if sol.duality_gap > DUALITY_TOL * max(1.0, abs(obj)):
        raise NumericError(f"configuration LP duality gap {sol.duality_gap:.3g}")
    return sol


def solve_config_lp(profile: Sequence[Valuation], caps, method: str = "auto",
                    max_iter: int = 1000) -> ConfigLpSolution:
    """Solve the capped configuration LP for one valuation profile.

    ``method`` is ``"dense"`` (all ``2^m`` bundles per agent), ``"colgen"``
    (demand-oracle column generation) or ``"auto"``.
    """
    profile = list(profile)
    if not profile:
        raise InputError("profile has no agents")
    m, n = profile[0].m, len(profile)
    if any(v.m != m for v in profile):
        raise InputError("profile valuations use different item counts")
    q = _caps(caps, m)
    if method == "auto":
        method = "dense" if m <= MAX_TABLE_ITEMS and n << m <= DENSE_COLUMN_LIMIT else "colgen"
    if method == "dense":
        if m > MAX_TABLE_ITEMS:
            raise CapabilityError(f"dense configuration LP needs m <= {MAX_TABLE_ITEMS}")
        cols = []
        for i, v in enumerate(profile):
            t = v.table()
            cols.extend((i, int(S), float(t[S])) for S in np.flatnonzero(t > 0))
        if not cols:
            return _finish(profile, [], np.zeros(0), np.zeros(m), np.zeros(n), 0.0, q, method, 1)
        x, y, u, obj = _restricted_lp(cols, q, n, m)
        return _finish(profile, cols, x, y, u, obj, q, method, 1)
    if method != "colgen":
        raise InputError(f"unknown LP method {method!r}")
    return _column_generation(profile, q, max_iter)


def _column_generation(profile, q, max_iter) -> ConfigLpSolution:
    m, n = profile[0].m, len(profile)
    seen: set[tuple[int, int]] = set()
    cols: list[tuple[int, int, float]] = []

    def add(i: int, S: int) -> None:
        val = profile[i].value(S)
        if (i, S) not in seen and val > 0:
            seen.add((i, S))
            cols.append((i, S, val))

    full = (1 << m) - 1
    for i in range(n):
        for j in range(m):
            add(i, 1 << j)
        add(i, full)
    if m <= MAX_EXHAUSTIVE_ITEMS:
        _, parts = opt_welfare(profile)
        for i, S in enumerate(parts):
            add(i, S.bits)
    if not cols:
        return _finish(profile, [], np.zeros(0), np.zeros(m), np.zeros(n), 0.0, q, "colgen", 0)
    for it in range(1, max_iter + 1):
        x, y, u, obj = _restricted_lp(cols, q, n, m)
        viol = dual_violations(profile, y, u)
        fresh = [(i, S) for i, S, _ in viol if (i, S.bits) not in seen]
        if not fresh:
            if viol:
                raise NumericError("column generation stalled on an existing column")
            return _finish(profile, cols, x, y, u, obj, q, "colgen", it)
        for i, S in fresh:
            add(i, S.bits)
    raise NumericError(f"column generation did not converge in {max_iter} rounds")


def dual_violations(profile: Sequence[Valuation], y, u, tol: float = TOL
                    ) -> list[tuple[int, ItemSet, float]]:
    out = []
    y = np.asarray(y, dtype=float)
    for i, v in enumerate(profile):
        S = demand(v, y)
        slack = v.value(S) - float(u[i]) - float(sum(y[j] for j in S))
        if slack > tol:
            out.append((i, S, slack))
    return out


def dual_separation(profile: Sequence[Valuation], y, u, tol: float = TOL
                    ) -> tuple[int, ItemSet, float] | None:
    """Most violated dual constraint ``(agent, bundle, violation)`` or ``None``."""
    viol = dual_violations(profile, y, u, tol)
    return max(viol, key=lambda r: r[2]) if viol else None


def f_value(profile: Sequence[Valuation], q: float, method: str = "auto") -> float:
    return solve_config_lp(profile, q, method).objective


def opt_welfare(profile: Sequence[Valuation]) -> tuple[float, list[ItemSet]]:
    """Optimal welfare and an optimal partition by subset dynamic programming."""
    profile = list(profile)
    m, n = profile[0].m, len(profile)
    full = (1 << m) - 1
    if n == 1:
        return profile[0].value(full), [ItemSet(full, m)]
    if m > MAX_EXHAUSTIVE_ITEMS:
        raise CapabilityError(f"optimal welfare needs m <= {MAX_EXHAUSTIVE_ITEMS}")
    W = np.zeros(1 << m)
    choices = []
    for v in profile:
        t = v.table()
        newW = np.empty_like(W)
        pick = np.empty(1 << m, dtype=np.int64)
        for U, subs in subset_groups(m):
            vals = t[subs] + W[U[:, None] ^ subs]
            best = vals.argmax(axis=1)
            rows = np.arange(U.size)
            newW[U] = vals[rows, best]
            pick[U] = subs[rows, best]
        W = newW
        choices.append(pick)
    parts, S = [], full
    for pick in reversed(choices):
        part = int(pick[S])
        parts.append(ItemSet(part, m))
        S ^= part
    parts.reverse()
    return float(W[full]), parts


@dataclass
class BayesLpSolution:
    """Solution of the Bayesian configuration LP.

    ``lambdas[idx][i]`` is agent ``i``'s lottery at profile ``idx``.  In
    ``interim`` mode ``y[i]`` has shape ``(support_i, m)``; in ``ex_ante``
    mode ``y`` is a single ``m`` vector.
    """

    mode: str
    objective: float
    dual_objective: float
    lambdas: dict[tuple[int, ...], list[SetDistribution]]
    y: list[np.ndarray] | np.ndarray
    u: dict[tuple[int, ...], np.ndarray]
    profiles: list[tuple[tuple[int, ...], float]]

    @property
    def duality_gap(self) -> float:
        return abs(self.objective - self.dual_objective)


def _interim_caps(inst: Instance, caps) -> list[np.ndarray]:
    if np.isscalar(caps):
        return [np.full((len(D), inst.m), float(caps)) for D in inst.agents]
    z = [np.asarray(c, dtype=float) for c in caps]
    if len(z) != inst.n or any(zi.shape != (len(D), inst.m) for zi, D in zip(z, inst.agents)):
        raise InputError("interim caps need one (support, m) array per agent")
    if any(np.any(zi < -TOL) or np.any(zi > 1 + TOL) for zi in z):
        raise InputError("interim caps must lie in [0, 1]")
    return [np.clip(zi, 0.0, 1.0) for zi in z]


def solve_bayes_config_lp(inst: Instance, caps, mode: str = "interim") -> BayesLpSolution:
    """Bayesian configuration LP over all profiles of ``inst``.

    ``interim``: for every agent ``i``, type ``v_i`` and item ``j``,
    ``E_{v_-i}[sum_{S ∋ j} λ^{i,v}_S] <= z_ij(v_i)``; ``caps`` is a scalar or a
    list of ``(support_i, m)`` arrays.  ``ex_ante``: for every item,
    ``E_v[sum_i sum_{S ∋ j} λ^{i,v}_S] <= q_j``.  Each ``λ^{i,v}`` has total
    mass at most one.
    """
    m, n = inst.m, inst.n
    if m > MAX_TABLE_ITEMS:
        raise CapabilityError(f"Bayesian configuration LP needs m <= {MAX_TABLE_ITEMS}")
    if mode == "interim":
        z = _interim_caps(inst, caps)
        offsets = np.cumsum([0] + [len(D) * m for D in inst.agents])
        n_cap_rows = int(offsets[-1])
        b_caps = np.concatenate([zi.ravel() for zi in z])
    elif mode == "ex_ante":
        qv = _caps(caps, m)
        n_cap_rows = m
        b_caps = qv
    else:
        raise InputError(f"unknown Bayesian LP mode {mode!r}")
    profiles = [(idx, p) for idx, p, _ in iter_profiles(inst)]
    B = bit_matrix(m)
    rows, cids, vals, obj, meta = [], [], [], [], []
    mass_row = n_cap_rows
    for pidx, (idx, p) in enumerate(profiles):
        for i in range(n):
            s = idx[i]
            t = inst.agents[i].valuations[s].table()
            p_i = inst.agents[i].probs[s]
            for S in np.flatnonzero(t > 0):
                c = len(obj)
                obj.append(p * t[S])
                meta.append((pidx, i, int(S)))
                items = np.flatnonzero(B[S])
                if mode == "interim":
                    rows.extend(offsets[i] + s * m + items)
                    vals.extend([p / p_i] * items.size)
                else:
                    rows.extend(items)
                    vals.extend([p] * items.size)
                cids.extend([c] * items.size)
                rows.append(mass_row)
                cids.append(c)
                vals.append(1.0)
            mass_row += 1
    n_rows = mass_row
    b = np.concatenate([b_caps, np.ones(n_rows - n_cap_rows)])
    if obj:
        A = sparse.csr_matrix((vals, (rows, cids)), shape=(n_rows, len(obj)))
        res = maximize(np.array(obj), A_ub=A, b_ub=b, what="Bayesian configuration LP")
        x, duals, value = res.x, res.ineq_duals, res.objective
    else:
        x, duals, value = np.zeros(0), np.zeros(n_rows), 0.0
    weights: dict[tuple[int, tuple[int, int]], list] = {}
    for (pidx, i, S), w in zip(meta, x):
        weights.setdefault((pidx, i), []).append((S, w))
    lambdas = {}
    u = {}
    for pidx, (idx, _) in enumerate(profiles):
        lambdas[idx] = []
        for i in range(n):
            cols = weights.get((pidx, i), [])
            lambdas[idx].append(SetDistribution.from_weights(
                [S for S, _ in cols], [w for _, w in cols], m))
        u[idx] = duals[n_cap_rows + pidx * n: n_cap_rows + (pidx + 1) * n]
    cap_duals = duals[:n_cap_rows]
    if mode == "interim":
        y = [cap_duals[offsets[i]:offsets[i + 1]].reshape(len(D), m)
             for i, D in enumerate(inst.agents)]
    else:
        y = cap_duals
    dual = float(b_caps @ cap_duals + duals[n_cap_rows:].sum())
    sol = BayesLpSolution(mode, value, dual, lambdas, y, u, profiles)
    if sol.duality_gap > DUALITY_TOL * max(1.0, abs(value)):
        raise NumericError(f"Bayesian LP duality gap {sol.duality_gap:.3g}")
    return sol


def expected_f(inst: Instance, q: float, method: str = "auto") -> float:
    """``E_v f^v(q)`` by exact enumeration of profiles."""
    return float(sum(p * f_value(prof, q, method) for _, p, prof in iter_profiles(inst)))
