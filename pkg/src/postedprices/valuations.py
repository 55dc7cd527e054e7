"""Valuation families, the demand oracle, and Bayesian instances."""

from __future__ import annotations

import itertools
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import CapabilityError, InputError
from .itemset import (MAX_EXHAUSTIVE_ITEMS, MAX_ITEMS, MAX_TABLE_ITEMS, TOL, ItemSet, as_mask,
                      bit_matrix, check_table_size, mask_items, set_sums, subset_groups)

MAX_PROFILES = 10**6


class Valuation:
    """Monotone, normalised set function over ``m`` items.

    Subclasses implement :meth:`_value` and may override :meth:`_table` and
    :meth:`_fast_demand`.  Instances are immutable; the full value table is
    built lazily and cached.
    """

    kind = "abstract"

    def __init__(self, m: int) -> None:
        if not 0 <= m <= MAX_ITEMS:
            raise InputError(f"item count {m} outside [0, {MAX_ITEMS}]")
        self.m = m
        self._cache: np.ndarray | None = None

    def value(self, S: "ItemSet | int | Iterable[int]") -> float:
        bits = as_mask(S, self.m)
        if self._cache is not None:
            return float(self._cache[bits])
        return float(self._value(bits))

    __call__ = value

    def table(self) -> np.ndarray:
        """Read-only array of ``v(S)`` indexed by mask."""
        if self._cache is None:
            check_table_size(self.m)
            t = np.asarray(self._table(), dtype=float)
            t.setflags(write=False)
            self._cache = t
        return self._cache

    def singletons(self) -> np.ndarray:
        return np.array([self._value(1 << j) for j in range(self.m)], dtype=float)

    def demand(self, prices, available=None) -> ItemSet:
        return demand(self, prices, available)

    def _value(self, bits: int) -> float:
        raise NotImplementedError

    def _table(self) -> np.ndarray:
        return np.array([self._value(S) for S in range(1 << self.m)])

    def _fast_demand(self, p: np.ndarray, A: int) -> int | None:
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}(m={self.m})"


def _weights(w, name: str) -> np.ndarray:
    arr = np.asarray(w, dtype=float).ravel()
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InputError(f"{name} must be finite and non-negative")
    arr.setflags(write=False)
    return arr


class Additive(Valuation):
    kind = "additive"

    def __init__(self, weights: Sequence[float]) -> None:
        self.weights = _weights(weights, "additive weights")
        super().__init__(self.weights.size)

    def _value(self, bits: int) -> float:
        return float(sum(self.weights[j] for j in mask_items(bits)))

    def _table(self) -> np.ndarray:
        return set_sums(self.weights)

    def _fast_demand(self, p: np.ndarray, A: int) -> int:
        out = 0
        for j in mask_items(A):
            gain = self.weights[j] - p[j]
            if gain > TOL or (gain >= -TOL and self.weights[j] > 0):
                out |= 1 << j
        return out

    def to_dict(self) -> dict:
        return {"kind": self.kind, "weights": self.weights.tolist()}


class UnitDemand(Valuation):
    kind = "unit_demand"

    def __init__(self, weights: Sequence[float]) -> None:
        self.weights = _weights(weights, "unit-demand weights")
        super().__init__(self.weights.size)

    def _value(self, bits: int) -> float:
        return max((float(self.weights[j]) for j in mask_items(bits)), default=0.0)

    def _table(self) -> np.ndarray:
        t = np.zeros(1 << self.m)
        B = bit_matrix(self.m)
        for j in range(self.m):
            t = np.maximum(t, B[:, j] * self.weights[j])
        return t

    def _fast_demand(self, p: np.ndarray, A: int) -> int:
        best, best_u, best_v = 0, 0.0, 0.0
        for j in mask_items(A):
            u, v = self.weights[j] - p[j], self.weights[j]
            if u > best_u + TOL or (u >= best_u - TOL and v > best_v + TOL):
                best, best_u, best_v = 1 << j, u, v
        return best

    def to_dict(self) -> dict:
        return {"kind": self.kind, "weights": self.weights.tolist()}


class XOS(Valuation):
    """Pointwise maximum of additive clauses."""

    kind = "xos"

    def __init__(self, clauses: Sequence[Sequence[float]]) -> None:
        C = np.atleast_2d(np.asarray(clauses, dtype=float))
        if C.size == 0:
            raise InputError("xos valuation needs at least one clause")
        self.clauses = _weights(C, "xos clauses").reshape(C.shape)
        super().__init__(self.clauses.shape[1])

    def _value(self, bits: int) -> float:
        items = mask_items(bits)
        if not items:
            return 0.0
        return float(self.clauses[:, items].sum(axis=1).max())

    def _table(self) -> np.ndarray:
        return (bit_matrix(self.m) @ self.clauses.T).max(axis=1)

    def _fast_demand(self, p: np.ndarray, A: int) -> int | None:
        if self.m <= MAX_TABLE_ITEMS:
            return None
        # max_S max_c c(S) - p(S) separates per clause
        best, best_u = 0, -np.inf
        for c in self.clauses:
            S = sum(1 << j for j in mask_items(A) if c[j] - p[j] > TOL)
            u = sum(c[j] - p[j] for j in mask_items(S))
            if u > best_u + TOL:
                best, best_u = S, u
        return best

    def to_dict(self) -> dict:
        return {"kind": self.kind, "clauses": self.clauses.tolist()}


class Table(Valuation):
    """Explicit value table of length ``2^m``."""

    kind = "table"

    def __init__(self, values: Sequence[float], m: int | None = None, check: bool = True) -> None:
        t = np.asarray(values, dtype=float).ravel().copy()
        if m is None:
            m = int(t.size).bit_length() - 1
        if t.size != 1 << m:
            raise InputError(f"table valuation needs 2^{m} = {1 << m} entries, got {t.size}")
        check_table_size(m)
        if check:
            if not np.all(np.isfinite(t)) or np.any(t < -TOL):
                raise InputError("table values must be finite and non-negative")
            if abs(t[0]) > TOL:
                raise InputError(f"table valuation has v(empty) = {t[0]}, expected 0")
            B = bit_matrix(m)
            for j in range(m):
                has = B[:, j] > 0
                if np.any(t[has] < t[~has] - TOL):
                    raise InputError(f"table valuation is not monotone in item {j}")
        t[0] = 0.0
        np.maximum(t, 0.0, out=t)
        super().__init__(m)
        t.setflags(write=False)
        self._cache = t

    def _value(self, bits: int) -> float:
        return float(self._cache[bits])

    def _table(self) -> np.ndarray:
        return self._cache

    def to_dict(self) -> dict:
        return {"kind": self.kind, "m": self.m, "values": self._cache.tolist()}


class ScaledSum(Valuation):
    """Non-negative combination ``sum_k w_k v_k``."""

    kind = "scaled_sum"

    def __init__(self, terms: Sequence[tuple[float, Valuation]]) -> None:
        terms = [(float(w), v) for w, v in terms]
        if not terms:
            raise InputError("scaled_sum needs at least one term")
        ms = {v.m for _, v in terms}
        if len(ms) != 1:
            raise InputError("scaled_sum terms over different item counts")
        if any(w < 0 or not np.isfinite(w) for w, _ in terms):
            raise InputError("scaled_sum weights must be finite and non-negative")
        self.terms = tuple(terms)
        super().__init__(ms.pop())

    def _value(self, bits: int) -> float:
        return float(sum(w * v.value(bits) for w, v in self.terms))

    def _table(self) -> np.ndarray:
        return sum(w * v.table() for w, v in self.terms)

    def to_dict(self) -> dict:
        return {"kind": self.kind,
                "terms": [{"weight": w, "valuation": v.to_dict()} for w, v in self.terms]}


def restrict(v: Valuation, U: "ItemSet | int") -> Table:
    """``S -> v(S & U)`` as an explicit table."""
    U = as_mask(U, v.m)
    masks = np.arange(1 << v.m, dtype=np.int64)
    return Table(v.table()[masks & U], v.m, check=False)


def as_prices(prices, m: int) -> np.ndarray:
    """Validate a price vector; ``+inf`` marks an item that is never sold."""
    p = np.asarray(getattr(prices, "values", prices), dtype=float).ravel()
    if p.size != m:
        raise InputError(f"price vector has {p.size} entries, expected {m}")
    if np.any(np.isnan(p)) or np.any(p < 0) or np.any(p == -np.inf):
        raise InputError("prices must be non-negative (or +inf)")
    return p


def demand(v: Valuation, prices, available: "ItemSet | int | None" = None) -> ItemSet:
    """Utility-maximising bundle within ``available``.

    Ties go to the larger value ``v(S)``, then to the smallest mask.
    Infinitely priced items are never demanded.
    """
    p = as_prices(prices, v.m)
    A = (1 << v.m) - 1 if available is None else as_mask(available, v.m)
    for j in np.flatnonzero(np.isinf(p)):
        A &= ~(1 << int(j))
    fast = v._fast_demand(p, A)
    if fast is not None:
        return ItemSet(fast, v.m)
    if v.m > MAX_TABLE_ITEMS:
        raise CapabilityError(f"demand for {v.kind} valuations needs m <= {MAX_TABLE_ITEMS}")
    return ItemSet(_enumerated_demand(v.table(), p, A), v.m)


def _enumerated_demand(t: np.ndarray, p: np.ndarray, A: int) -> int:
    items = mask_items(A)
    if not items:
        return 0
    pos = np.array(items, dtype=np.int64)
    pat = bit_matrix(pos.size)
    subs = pat.astype(np.int64) @ (np.int64(1) << pos)
    vals = t[subs]
    util = vals - pat @ p[pos]
    cand = util >= util.max() - TOL
    vmax = vals[cand].max()
    pick = np.flatnonzero(cand & (vals >= vmax - TOL))[0]
    return int(subs[pick])


def demand_utility(v: Valuation, prices, available=None) -> float:
    S = demand(v, prices, available)
    p = as_prices(prices, v.m)
    return v.value(S) - float(sum(p[j] for j in S))


def is_monotone(v: Valuation, tol: float = TOL) -> bool:
    check_table_size(v.m, MAX_EXHAUSTIVE_ITEMS, "monotonicity check")
    t = v.table()
    B = bit_matrix(v.m)
    return all(np.all(t[B[:, j] > 0] >= t[B[:, j] == 0] - tol) for j in range(v.m))


def is_subadditive(v: Valuation, tol: float = TOL) -> bool:
    """Exhaustive check of ``v(S) + v(T) >= v(S | T)``.

    For monotone functions it suffices to test disjoint pairs (``3^m`` work).
    """
    check_table_size(v.m, MAX_EXHAUSTIVE_ITEMS, "subadditivity check")
    t = v.table()
    if is_monotone(v, tol):
        for U, subs in subset_groups(v.m):
            if np.any(t[subs] + t[U[:, None] ^ subs] < t[U][:, None] - tol):
                return False
        return True
    masks = np.arange(1 << v.m, dtype=np.int64)
    for S in range(1 << v.m):
        if np.any(t[S] + t < t[S | masks] - tol):
            return False
    return True


class ValuationDistribution:
    """Finite-support distribution over valuations on a common ground set."""

    def __init__(self, support: Sequence[tuple[float, Valuation]], tol: float = TOL) -> None:
        support = [(float(p), v) for p, v in support]
        if not support:
            raise InputError("valuation distribution has empty support")
        if any(not (0.0 < p <= 1.0 + tol) for p, _ in support):
            raise InputError("support probabilities must lie in (0, 1]")
        total = sum(p for p, _ in support)
        if abs(total - 1.0) > tol:
            raise InputError(f"support probabilities sum to {total}, expected 1")
        ms = {v.m for _, v in support}
        if len(ms) != 1:
            raise InputError("valuations in one distribution use different item counts")
        self.m = ms.pop()
        self.probs = np.array([p for p, _ in support])
        self.valuations = tuple(v for _, v in support)

    @classmethod
    def point(cls, v: Valuation) -> "ValuationDistribution":
        return cls([(1.0, v)])

    def __len__(self) -> int:
        return len(self.valuations)

    def __iter__(self) -> Iterator[tuple[float, Valuation]]:
        return zip(self.probs.tolist(), self.valuations)

    def singleton_values(self) -> np.ndarray:
        """Array of shape ``(support, m)`` with ``v({j})``."""
        return np.array([v.singletons() for v in self.valuations])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(len(self), size=size, p=self.probs)


class Instance:
    """Independent buyers with finite-support valuation distributions."""

    def __init__(self, m: int, agents: Sequence[ValuationDistribution],
                 order: Sequence[int] | None = None) -> None:
        if not agents:
            raise InputError("instance needs at least one agent")
        if any(D.m != m for D in agents):
            raise InputError(f"agent distributions must all use m={m}")
        self.m = m
        self.agents = tuple(agents)
        if order is not None:
            order = tuple(int(i) for i in order)
            if sorted(order) != list(range(self.n)):
                raise InputError(f"order {order} is not a permutation of the agents")
        self.order = order

    @property
    def n(self) -> int:
        return len(self.agents)

    @classmethod
    def deterministic(cls, profile: Sequence[Valuation],
                      order: Sequence[int] | None = None) -> "Instance":
        return cls(profile[0].m, [ValuationDistribution.point(v) for v in profile], order)

    def profile_count(self) -> int:
        return int(np.prod([len(D) for D in self.agents], dtype=object))

    def profile(self, idx: Sequence[int]) -> tuple[Valuation, ...]:
        return tuple(D.valuations[k] for D, k in zip(self.agents, idx))

    def profile_prob(self, idx: Sequence[int]) -> float:
        return float(np.prod([D.probs[k] for D, k in zip(self.agents, idx)]))

    def sample_indices(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Independent profile draws as an index array of shape ``(size, n)``."""
        return np.stack([D.sample(rng, size) for D in self.agents], axis=1)

    def value_scale(self) -> float:
        """Upper bound on the welfare of any profile."""
        return float(sum(max(v.value((1 << self.m) - 1) for v in D.valuations)
                         for D in self.agents))

    def resolve_order(self, order: Sequence[int] | None = None) -> tuple[int, ...]:
        if order is None:
            order = self.order or range(self.n)
        order = tuple(int(i) for i in order)
        if sorted(order) != list(range(self.n)):
            raise InputError(f"order {order} is not a permutation of the agents")
        return order


def iter_profiles(inst: Instance, limit: int = MAX_PROFILES
                  ) -> Iterator[tuple[tuple[int, ...], float, tuple[Valuation, ...]]]:
    """Yield ``(index tuple, probability, profile)`` over the product support."""
    if inst.profile_count() > limit:
        raise CapabilityError(f"product support {inst.profile_count()} exceeds {limit}")
    for idx in itertools.product(*(range(len(D)) for D in inst.agents)):
        yield idx, inst.profile_prob(idx), inst.profile(idx)


def enumerate_profiles(inst: Instance, limit: int = MAX_PROFILES
                       ) -> Iterator[tuple[float, tuple[Valuation, ...]]]:
    for _, p, prof in iter_profiles(inst, limit):
        yield p, prof
