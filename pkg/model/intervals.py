"""
Closed intervals and finite unions of them on the wall coordinate.
"""
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np


@dataclass(frozen=True, order=True)
class Interval:
    lower: float
    upper: float

    def __post_init__(self):
        if self.upper < self.lower:
            raise ValueError(f"empty interval [{self.lower}, {self.upper}]")

    @property
    def length(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper

    def interior_contains(self, x: float) -> bool:
        return self.lower < x < self.upper

    def depth(self, x: float) -> float:
        """Signed distance from x to the complement (negative outside)"""
        return min(x - self.lower, self.upper - x)

    def overlap(self, other: "Interval") -> float:
        return max(0.0, min(self.upper, other.upper) - max(self.lower, other.lower))

    def union(self, other: "Interval") -> "Interval":
        return Interval(min(self.lower, other.lower), max(self.upper, other.upper))

    def add(self, shift: float) -> "Interval":
        return Interval(self.lower + shift, self.upper + shift)

    def scaled(self, factor: float) -> "Interval":
        """Same midpoint, length multiplied by ``factor``"""
        half = 0.5 * self.length * factor
        return Interval(self.midpoint - half, self.midpoint + half)

    def as_list(self) -> List[float]:
        return [self.lower, self.upper]

    def __iter__(self):
        yield self.lower
        yield self.upper

    def __repr__(self):
        return "[%s,%s]" % (self.lower, self.upper)


def merge(intervals: Iterable[Interval]) -> List[Interval]:
    """Sorted disjoint union; touching intervals are joined"""
    merged: List[Interval] = []
    for iv in sorted(intervals):
        if merged and iv.lower <= merged[-1].upper:
            merged[-1] = merged[-1].union(iv)
        else:
            merged.append(iv)
    return merged


def erode(intervals: Sequence[Interval], delta: float) -> List[Interval]:
    """Points whose delta-neighbourhood stays inside the union"""
    out = []
    for iv in merge(intervals):
        lo, hi = iv.lower + delta, iv.upper - delta
        if hi >= lo:
            out.append(Interval(lo, hi))
    return out


def dilate(intervals: Sequence[Interval], delta: float) -> List[Interval]:
    return merge(Interval(iv.lower - delta, iv.upper + delta) for iv in intervals)


def measure(intervals: Sequence[Interval]) -> float:
    return float(sum(iv.length for iv in merge(intervals)))


def union_contains(intervals: Sequence[Interval], x: float) -> bool:
    return any(iv.contains(x) for iv in intervals)


def union_depth(intervals: Sequence[Interval], x: float) -> float:
    """Distance from x to the boundary of the union, negative when outside"""
    merged = merge(intervals)
    if not merged:
        return -np.inf
    inside = [iv.depth(x) for iv in merged if iv.contains(x)]
    if inside:
        return max(inside)
    return -min(min(abs(x - iv.lower), abs(x - iv.upper)) for iv in merged)


def endpoints(intervals: Sequence[Interval]) -> np.ndarray:
    """Flattened sorted endpoints of the merged union: [l0, u0, l1, u1, ...]"""
    merged = merge(intervals)
    return np.array([v for iv in merged for v in (iv.lower, iv.upper)], dtype=float)


def from_pairs(pairs: Iterable[Tuple[float, float]]) -> List[Interval]:
    return [Interval(float(a), float(b)) for a, b in pairs]
