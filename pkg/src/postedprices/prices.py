"""Anonymous item prices."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .itemset import ItemSet, as_mask, mask_items
from .valuations import as_prices


class PriceVector:
    """Non-negative item prices; ``+inf`` marks an item that is never sold."""

    def __init__(self, values: Iterable[float]) -> None:
        arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                         dtype=float).ravel()
        self.values = as_prices(arr, arr.size).copy()
        self.values.setflags(write=False)

    @property
    def m(self) -> int:
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values.astype(dtype) if dtype is not None else self.values

    def __len__(self) -> int:
        return self.m

    def __getitem__(self, j: int) -> float:
        return float(self.values[j])

    def total(self, S: "ItemSet | int") -> float:
        return float(sum(self.values[j] for j in mask_items(as_mask(S, self.m))))

    def finite_mask(self) -> int:
        return sum(1 << j for j in range(self.m) if np.isfinite(self.values[j]))

    def to_list(self) -> list:
        return [float(x) if np.isfinite(x) else "inf" for x in self.values]

    @classmethod
    def from_list(cls, values: Iterable) -> "PriceVector":
        return cls([np.inf if x in ("inf", "Infinity") else float(x) for x in values])

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PriceVector) and np.array_equal(self.values, other.values)

    def __repr__(self) -> str:
        return f"PriceVector({self.to_list()})"
