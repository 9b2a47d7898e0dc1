"""Finite unions of closed intervals on the line."""
from __future__ import annotations

from typing import Iterable

import numpy as np

CONTAIN_TOL = 1e-12


class IntervalUnion:
    """Sorted, pairwise disjoint closed intervals.

    Construction merges overlapping and touching intervals (gap tolerance 0).

    >>> IntervalUnion([(0, 0.5), (0.5, 1), (2, 3)])
    IntervalUnion([(0.0, 1.0), (2.0, 3.0)])
    """

    __slots__ = ("lo", "hi")

    def __init__(self, intervals=(), *, _merged=False):
        if _merged:
            self.lo, self.hi = intervals
            return
        arr = np.asarray(list(intervals) if not isinstance(intervals, np.ndarray) else intervals,
                         dtype=float)
        if arr.size == 0:
            self.lo = np.zeros(0)
            self.hi = np.zeros(0)
            return
        arr = arr.reshape(-1, 2)
        self.lo, self.hi = merge(arr[:, 0], arr[:, 1])

    @classmethod
    def from_arrays(cls, lo, hi, gap: float = 0.0) -> "IntervalUnion":
        return cls(merge(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float), gap), _merged=True)

    @classmethod
    def empty(cls) -> "IntervalUnion":
        return cls()

    def __len__(self) -> int:
        return len(self.lo)

    def __iter__(self):
        return iter(zip(self.lo.tolist(), self.hi.tolist()))

    def __repr__(self) -> str:
        return f"IntervalUnion({list(self)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, IntervalUnion):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    @property
    def is_empty(self) -> bool:
        return len(self.lo) == 0

    def measure(self) -> float:
        return float(np.sum(self.hi - self.lo))

    def longest(self) -> tuple[float, float] | None:
        if self.is_empty:
            return None
        i = int(np.argmax(self.hi - self.lo))
        return float(self.lo[i]), float(self.hi[i])

    def contains_interval(self, a: float, b: float, tol: float = CONTAIN_TOL) -> bool:
        """Whether ``[a, b]`` lies inside one component, up to ``tol``."""
        if self.is_empty:
            return False
        i = np.searchsorted(self.lo, a + tol, side="right") - 1
        return bool(i >= 0 and self.lo[i] <= a + tol and self.hi[i] >= b - tol)

    def contains(self, x: float, tol: float = CONTAIN_TOL) -> bool:
        return self.contains_interval(x, x, tol)

    def union(self, other: "IntervalUnion") -> "IntervalUnion":
        return IntervalUnion.from_arrays(np.concatenate([self.lo, other.lo]),
                                         np.concatenate([self.hi, other.hi]))

    def minkowski(self, other: "IntervalUnion") -> "IntervalUnion":
        lo = (self.lo[:, None] + other.lo[None, :]).ravel()
        hi = (self.hi[:, None] + other.hi[None, :]).ravel()
        return IntervalUnion.from_arrays(lo, hi)

    def to_text(self) -> str:
        return "".join(f"{a!r},{b!r}\n" for a, b in self)

    @classmethod
    def from_text(cls, text: str) -> "IntervalUnion":
        rows = [line.split(",") for line in text.splitlines() if line.strip() and not line.startswith("#")]
        return cls([(float(a), float(b)) for a, b in rows])


def merge(lo: np.ndarray, hi: np.ndarray, gap: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Merge closed intervals; touching endpoints coalesce, as do gaps of at
    most ``gap``."""
    if len(lo) == 0:
        return np.zeros(0), np.zeros(0)
    order = np.lexsort((hi, lo))
    lo, hi = lo[order], hi[order]
    run = np.maximum.accumulate(hi)
    start = np.ones(len(lo), dtype=bool)
    start[1:] = lo[1:] > run[:-1] + gap
    idx = np.nonzero(start)[0]
    ends = np.append(idx[1:], len(lo)) - 1
    return lo[idx].copy(), run[ends].copy()


def measure(u: IntervalUnion) -> float:
    return u.measure()


def union_of(parts: Iterable[IntervalUnion]) -> IntervalUnion:
    parts = list(parts)
    if not parts:
        return IntervalUnion()
    return IntervalUnion.from_arrays(np.concatenate([p.lo for p in parts]),
                                     np.concatenate([p.hi for p in parts]))
