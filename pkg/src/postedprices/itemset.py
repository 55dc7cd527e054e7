"""Item sets as bitmasks, vectorised subset helpers and lotteries over sets.

Bit ``j`` of a mask is item ``j``.  Most routines work on plain ``int`` masks
for speed; :class:`ItemSet` is the validated public wrapper.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import CapabilityError, InputError

MAX_ITEMS = 24
MAX_TABLE_ITEMS = 16
MAX_EXHAUSTIVE_ITEMS = 14
TOL = 1e-9


@dataclass(frozen=True, order=True)
class ItemSet:
    """A subset of ``{0, ..., m-1}`` stored as a bitmask."""

    bits: int
    m: int

    def __post_init__(self) -> None:
        if not 0 <= self.m <= MAX_ITEMS:
            raise InputError(f"item count {self.m} outside [0, {MAX_ITEMS}]")
        if self.bits < 0 or self.bits >> self.m:
            raise InputError(f"mask {self.bits:#x} has bits outside {self.m} items")

    @classmethod
    def of(cls, items: Iterable[int], m: int) -> "ItemSet":
        bits = 0
        for j in items:
            if not 0 <= j < m:
                raise InputError(f"item {j} outside [0, {m})")
            bits |= 1 << j
        return cls(bits, m)

    @classmethod
    def empty(cls, m: int) -> "ItemSet":
        return cls(0, m)

    @classmethod
    def full(cls, m: int) -> "ItemSet":
        return cls((1 << m) - 1, m)

    def _other(self, other: "ItemSet | int") -> int:
        if isinstance(other, ItemSet):
            if other.m != self.m:
                raise InputError("item sets over different ground sets")
            return other.bits
        return int(other)

    def __or__(self, other: "ItemSet | int") -> "ItemSet":
        return ItemSet(self.bits | self._other(other), self.m)

    def __and__(self, other: "ItemSet | int") -> "ItemSet":
        return ItemSet(self.bits & self._other(other), self.m)

    def __sub__(self, other: "ItemSet | int") -> "ItemSet":
        return ItemSet(self.bits & ~self._other(other), self.m)

    union, intersection, difference = __or__, __and__, __sub__

    def complement(self) -> "ItemSet":
        return ItemSet(((1 << self.m) - 1) & ~self.bits, self.m)

    def issubset(self, other: "ItemSet | int") -> bool:
        return self.bits & ~self._other(other) == 0

    def __contains__(self, j: int) -> bool:
        return 0 <= j < self.m and bool(self.bits >> j & 1)

    def __iter__(self) -> Iterator[int]:
        return iter(mask_items(self.bits))

    def __len__(self) -> int:
        return self.bits.bit_count()

    def __int__(self) -> int:
        return self.bits

    def __index__(self) -> int:
        return self.bits

    def __repr__(self) -> str:
        return f"ItemSet({{{', '.join(map(str, self))}}}, m={self.m})"


def as_mask(S: "ItemSet | int | Iterable[int]", m: int) -> int:
    """Normalise an item-set-like value to a validated integer mask."""
    if isinstance(S, ItemSet):
        if S.m != m:
            raise InputError(f"item set over {S.m} items used with m={m}")
        return S.bits
    if isinstance(S, (int, np.integer)):
        bits = int(S)
        if bits < 0 or bits >> m:
            raise InputError(f"mask {bits:#x} has bits outside {m} items")
        return bits
    return ItemSet.of(S, m).bits


def mask_items(bits: int) -> list[int]:
    out, j = [], 0
    while bits:
        if bits & 1:
            out.append(j)
        bits >>= 1
        j += 1
    return out


def check_table_size(m: int, limit: int = MAX_TABLE_ITEMS, what: str = "table") -> None:
    if m > limit:
        raise CapabilityError(f"{what} needs 2^{m} entries; limit is m <= {limit}")


@lru_cache(maxsize=None)
def bit_matrix(m: int) -> np.ndarray:
    """``B[S, j] = 1`` iff ``j in S``, shape ``(2^m, m)``, float64, read-only."""
    check_table_size(m)
    masks = np.arange(1 << m, dtype=np.int64)
    B = ((masks[:, None] >> np.arange(m)) & 1).astype(np.float64)
    B.setflags(write=False)
    return B


@lru_cache(maxsize=None)
def popcounts(m: int) -> np.ndarray:
    pc = bit_matrix(m).sum(axis=1).astype(np.int64)
    pc.setflags(write=False)
    return pc


def set_sums(weights: np.ndarray) -> np.ndarray:
    """``w(S)`` for every mask ``S``; infinite weights propagate."""
    w = np.asarray(weights, dtype=float)
    m = w.size
    out = np.zeros(1 << m)
    for j in range(m):
        step = 1 << j
        view = out.reshape(-1, 2 * step)
        view[:, step:] = view[:, :step] + w[j]
    return out


def submasks(A: int) -> np.ndarray:
    """All submasks of ``A`` in ascending order."""
    pos = np.array(mask_items(A), dtype=np.int64)
    if pos.size == 0:
        return np.zeros(1, dtype=np.int64)
    pat = bit_matrix(pos.size).astype(np.int64)
    return pat @ (np.int64(1) << pos)


def expand_masks(local: np.ndarray, U: int) -> np.ndarray:
    """Map masks over the compressed ground set ``U`` back to full masks."""
    pos = np.array(mask_items(U), dtype=np.int64)
    local = np.asarray(local, dtype=np.int64)
    out = np.zeros_like(local)
    for t, j in enumerate(pos):
        out |= ((local >> t) & 1) << j
    return out


def compress_mask(S: int, U: int) -> int:
    out = 0
    for t, j in enumerate(mask_items(U)):
        if S >> j & 1:
            out |= 1 << t
    return out


def subset_groups(m: int):
    """Yield ``(U, subs)`` per popcount class of the masks over ``m`` items.

    ``U`` has shape ``(G,)`` and ``subs`` shape ``(G, 2^k)`` with ascending
    submasks of each row's ``U``.  Total work is ``3^m``.
    """
    check_table_size(m, MAX_EXHAUSTIVE_ITEMS, "subset enumeration")
    masks = np.arange(1 << m, dtype=np.int64)
    pc = popcounts(m)
    B = bit_matrix(m)
    for k in range(m + 1):
        U = masks[pc == k]
        if k == 0:
            yield U, np.zeros((1, 1), dtype=np.int64)
            continue
        pos = np.nonzero(B[U])[1].reshape(U.size, k)
        pat = bit_matrix(k).astype(np.int64)
        yield U, (np.int64(1) << pos) @ pat.T


class SetDistribution:
    """A finite lottery over item sets.

    Atoms with equal masks are merged, atoms with zero weight dropped and
    masks kept sorted, so two lotteries with equal mass functions compare
    equal.
    """

    def __init__(self, atoms: Mapping[int, float] | Iterable[tuple[int, float]], m: int,
                 tol: float = TOL) -> None:
        items = atoms.items() if isinstance(atoms, Mapping) else atoms
        acc: dict[int, float] = {}
        for S, w in items:
            w = float(w)
            if w < -tol or not np.isfinite(w):
                raise InputError(f"negative or non-finite weight {w} in set distribution")
            bits = as_mask(S, m)
            acc[bits] = acc.get(bits, 0.0) + max(w, 0.0)
        acc = {S: w for S, w in acc.items() if w > 0.0}
        total = sum(acc.values())
        if abs(total - 1.0) > tol:
            raise InputError(f"set distribution weights sum to {total}, expected 1")
        self.m = m
        order = sorted(acc)
        self.masks = np.array(order, dtype=np.int64)
        self.probs = np.array([acc[S] for S in order], dtype=float)

    @classmethod
    def point(cls, S: "ItemSet | int", m: int) -> "SetDistribution":
        return cls({as_mask(S, m): 1.0}, m)

    @classmethod
    def from_weights(cls, masks: Iterable[int], weights: Iterable[float], m: int,
                     tol: float = 1e-7) -> "SetDistribution":
        """Build from solver output: clip tiny negatives, put slack on the empty set."""
        acc: dict[int, float] = {}
        for S, w in zip(masks, weights):
            if w > tol * 1e-3:
                acc[int(S)] = acc.get(int(S), 0.0) + float(w)
        total = sum(acc.values())
        if total > 1.0 + tol:
            raise InputError(f"lottery mass {total} exceeds 1")
        if total > 1.0:
            acc = {S: w / total for S, w in acc.items()}
        else:
            acc[0] = acc.get(0, 0.0) + (1.0 - total)
        return cls(acc, m, tol=tol)

    def __len__(self) -> int:
        return self.masks.size

    def __iter__(self) -> Iterator[tuple[ItemSet, float]]:
        for S, w in zip(self.masks, self.probs):
            yield ItemSet(int(S), self.m), float(w)

    def marginals(self) -> np.ndarray:
        bits = (self.masks[:, None] >> np.arange(self.m)) & 1
        return self.probs @ bits

    def marginal(self, j: int) -> float:
        return float(self.marginals()[j])

    def in_delta(self, q: float | np.ndarray, tol: float = TOL) -> bool:
        return bool(np.all(self.marginals() <= np.asarray(q) + tol))

    def to_dict(self) -> dict:
        return {"m": self.m, "atoms": [{"set": mask_items(int(S)), "p": float(w)}
                                       for S, w in zip(self.masks, self.probs)]}

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, SetDistribution) and self.m == other.m
                and np.array_equal(self.masks, other.masks)
                and np.allclose(self.probs, other.probs, atol=TOL, rtol=0))

    def __repr__(self) -> str:
        body = ", ".join(f"{mask_items(int(S))}: {w:.6g}" for S, w in zip(self.masks, self.probs))
        return f"SetDistribution({{{body}}}, m={self.m})"
