"""Set-cover gap functions, the stacked valuation and its adversary.

Items of a gap function with parameter ``k`` are the nonzero vectors of
``F_2^k``; item ``t`` is the vector with binary expansion ``t + 1``.  Cover
set ``S_i`` holds the vectors with odd inner product with ``i``, and
``f(T)`` is the least number of cover sets whose union contains ``T``.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .errors import CapabilityError, InputError, NumericError
from .game import protagonist_value
from .itemset import TOL, SetDistribution, as_mask, submasks
from .valuations import Valuation

MAX_GAP_K = 4
MAX_STACK_L = 2
EXACT_ATOM_LIMIT = 100_000
C_RATIO = 1.5


def _check_k(k: int) -> None:
    if not 1 <= k <= MAX_GAP_K:
        raise CapabilityError(f"gap functions need 1 <= k <= {MAX_GAP_K}")


@lru_cache(maxsize=None)
def cover_sets(k: int) -> tuple[int, ...]:
    """Item masks of ``S_i`` for ``i = 1..2^k - 1``."""
    _check_k(k)
    size = (1 << k) - 1
    return tuple(sum(1 << (j - 1) for j in range(1, size + 1) if (i & j).bit_count() % 2)
                 for i in range(1, size + 1))


@lru_cache(maxsize=None)
def gap_table(k: int) -> np.ndarray:
    """Minimum cover size for every subset of the ``2^k - 1`` items."""
    size = (1 << k) - 1
    masks = np.arange(1 << size, dtype=np.int64)
    t = np.full(masks.size, np.inf)
    t[0] = 0.0
    sets = np.array(cover_sets(k), dtype=np.int64)
    while True:
        new = t.copy()
        for A in sets:
            np.minimum(new, 1.0 + t[masks & ~A], out=new)
        if np.array_equal(new, t):
            break
        t = new
    t.setflags(write=False)
    return t


def gap_value(k: int, T) -> int:
    return int(gap_table(k)[as_mask(T, (1 << k) - 1)])


class GapFunction(Valuation):
    """The set-cover gap function as a valuation over ``2^k - 1`` items."""

    kind = "set_cover_gap"

    def __init__(self, k: int) -> None:
        _check_k(k)
        self.k = k
        super().__init__((1 << k) - 1)

    def _value(self, bits: int) -> float:
        return float(gap_table(self.k)[bits])

    def _table(self) -> np.ndarray:
        return np.asarray(gap_table(self.k), dtype=float)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "k": self.k}


@lru_cache(maxsize=None)
def subspace_family(k: int, d: int) -> tuple[int, ...]:
    """Item masks of all ``d``-dimensional subspaces of ``F_2^k`` minus zero."""
    _check_k(k)
    if not 0 <= d <= k:
        raise InputError(f"subspace dimension {d} outside [0, {k}]")
    found = set()
    for basis in itertools.combinations(range(1, 1 << k), d):
        span = {0}
        for b in basis:
            span |= {x ^ b for x in span}
        if len(span) == 1 << d:
            found.add(sum(1 << (x - 1) for x in span if x))
    return tuple(sorted(found))


class StackedValuation(Valuation):
    """Sum over levels ``ℓ = 0..L`` of block-averaged, normalised gap functions.

    ``m = 2^{2^L}``.  Level ``ℓ`` has ``m / 2^{2^ℓ}`` contiguous blocks, each a
    copy of the gap function with ``k = 2^ℓ``; the highest item ids at that
    level are left out.  ``v(M) = L + 1``.
    """

    kind = "stacked"

    def __init__(self, L: int) -> None:
        if not 0 <= L <= MAX_STACK_L:
            raise CapabilityError(f"stacked valuations need 0 <= L <= {MAX_STACK_L}")
        self.L = L
        super().__init__(2 ** (2 ** L))

    def levels(self) -> list[tuple[int, int, int]]:
        """``(k, block count, block size)`` per level."""
        out = []
        for ell in range(self.L + 1):
            k = 2 ** ell
            out.append((k, self.m // (2 ** k), 2 ** k - 1))
        return out

    def blocks(self, ell: int) -> list[int]:
        k, B, size = self.levels()[ell]
        return [((1 << size) - 1) << (b * size) for b in range(B)]

    def level_value(self, ell: int, bits: int) -> float:
        k, B, size = self.levels()[ell]
        t = gap_table(k)
        return float(sum(t[(bits >> (b * size)) & ((1 << size) - 1)] for b in range(B))) / (B * k)

    def level_table(self, ell: int) -> np.ndarray:
        k, B, size = self.levels()[ell]
        t = gap_table(k)
        masks = np.arange(1 << self.m, dtype=np.int64)
        out = np.zeros(masks.size)
        for b in range(B):
            out += t[(masks >> (b * size)) & ((1 << size) - 1)]
        return out / (B * k)

    def _value(self, bits: int) -> float:
        return sum(self.level_value(ell, bits) for ell in range(self.L + 1))

    def _table(self) -> np.ndarray:
        return sum(self.level_table(ell) for ell in range(self.L + 1))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "L": self.L}


def critical_level(q: float) -> int:
    """``ℓ* = ceil(log2 log2 (1/q))``, clamped at zero for ``q >= 1/2``."""
    if not 0 < q < 1:
        raise InputError("adversary needs 0 < q < 1")
    x = math.log2(1.0 / q)
    if x <= 1.0:
        return 0
    return max(0, math.ceil(math.log2(x) - 1e-12))


def adversary_dimension(ell: int, ell_star: int) -> int:
    x = ell - ell_star
    return math.floor(2 ** ell_star * (2 ** x - C_RATIO ** x) + 1e-12)


def adversary_mu(sv: StackedValuation, q: float, seed: int = 0,
                 n_samples: int = 10_000) -> SetDistribution:
    """Removal lottery from random subspaces at levels above ``ℓ*``.

    Each block at level ``ℓ > ℓ*`` draws a uniformly random subspace of
    dimension ``floor(2^{ℓ*} (2^x - c^x))``, ``x = ℓ - ℓ*``, ``c = 3/2``; ``T`` is
    the union.  The product is expanded exactly when it has at most
    ``EXACT_ATOM_LIMIT`` atoms and sampled otherwise.  Marginals are checked
    against ``q`` either way.
    """
    ell_star = critical_level(q)
    choices: list[tuple[int, ...]] = []
    for ell in range(ell_star + 1, sv.L + 1):
        k, B, size = sv.levels()[ell]
        fam = subspace_family(k, adversary_dimension(ell, ell_star))
        for b in range(B):
            choices.append(tuple(D << (b * size) for D in fam))
    atoms = math.prod(len(c) for c in choices)
    if atoms <= EXACT_ATOM_LIMIT:
        acc: dict[int, float] = {}
        w = 1.0 / atoms
        for combo in itertools.product(*choices):
            T = 0
            for D in combo:
                T |= D
            acc[T] = acc.get(T, 0.0) + w
        mu = SetDistribution(acc, sv.m)
    else:
        rng = np.random.default_rng(seed)
        acc = {}
        for _ in range(n_samples):
            T = 0
            for c in choices:
                T |= c[rng.integers(len(c))]
            acc[T] = acc.get(T, 0.0) + 1.0 / n_samples
        mu = SetDistribution(acc, sv.m, tol=1e-6)
    worst = float(mu.marginals().max()) if sv.m else 0.0
    if worst > q + TOL:
        raise NumericError(f"adversary marginal {worst} exceeds q = {q}")
    return mu


def best_response_value(sv: Valuation, q: float, mu: SetDistribution) -> float:
    """``max_{λ ∈ Δ(q)} E_{T~μ} sum_S λ_S v(S \\ T)``."""
    return protagonist_value(sv, mu, q)[0]


def proof_bound(sv: StackedValuation, q: float, mu: SetDistribution) -> float:
    """Level-by-level upper bound on the protagonist's best response to ``μ``.

    Levels below ``ℓ*`` contribute at most ``q sum_j v^ℓ({j})``, level ``ℓ*``
    at most one, and levels above ``ℓ*`` at most ``E_μ v^ℓ(M \\ T)``.
    """
    ell_star = critical_level(q)
    full = (1 << sv.m) - 1
    total = 0.0
    for ell in range(sv.L + 1):
        if ell < ell_star:
            total += q * sum(sv.level_value(ell, 1 << j) for j in range(sv.m))
        elif ell == ell_star:
            total += 1.0
        else:
            total += float(sum(w * sv.level_value(ell, full & ~int(T))
                               for T, w in zip(mu.masks, mu.probs)))
    return total


def asymptotic_bound(ell_star: int, c: float = C_RATIO) -> float:
    """Infinite-series form: ``ℓ* + 1 + (c/2)/(1 - c/2) + 2``."""
    return ell_star + 1 + (c / 2) / (1 - c / 2) + 2


def lemma11_report(k: int) -> dict:
    """Exhaustive checks of the gap-function properties for one ``k``."""
    _check_k(k)
    size = (1 << k) - 1
    t = gap_table(k)
    full = (1 << size) - 1
    out = {"k": k, "f_full": int(t[full]), "full_at_least_k": bool(t[full] >= k),
           "subadditive": True, "subspace_bound": True}
    # monotone, so disjoint pairs suffice
    bits = np.arange(1 << size, dtype=np.int64)
    out["monotone"] = all(np.all(t[bits | (1 << j)] >= t[bits]) for j in range(size))
    for S in range(1 << size):
        subs = submasks(full & ~S)
        if np.any(t[S] + t[subs] < t[S | subs]):
            out["subadditive"] = False
            break
    for d in range(k + 1):
        for D in subspace_family(k, d):
            if t[full & ~D] > k - d:
                out["subspace_bound"] = False
    return out


def build_lower_bound(L: int) -> StackedValuation:
    return StackedValuation(L)
