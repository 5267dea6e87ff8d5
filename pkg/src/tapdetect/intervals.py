"""Disjoint time-interval sets and their overlap metrics.

Intervals are half-open ``[start, end)`` in seconds. Endpoints are quantized
to an integer nanosecond grid on construction: endpoints closer than one
nanosecond collapse onto the same grid point, which both absorbs input
jitter and keeps all duration arithmetic exact for inputs aligned to any
coarser grid (e.g. milliseconds).
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Iterable, Sequence

NS_PER_S = 10**9


def _to_ns(seconds: float) -> int:
    return round(seconds * NS_PER_S)


def _merge_ns(pairs: Iterable[tuple[int, int]]) -> tuple[list[tuple[int, int]], int]:
    """Coalesce intervals, returning (merged, n_coalesced).

    ``n_coalesced`` counts input intervals that overlapped or touched an
    earlier one; touching intervals merge because the ranges are half-open.
    """
    ordered = sorted(pairs)
    merged: list[list[int]] = []
    n_coalesced = 0
    for start, end in ordered:
        if merged and start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
            n_coalesced += 1
        else:
            merged.append([start, end])
    return [(s, e) for s, e in merged], n_coalesced


@dataclass(frozen=True)
class IntervalSet:
    """Sorted, pairwise-disjoint half-open intervals on one timeline."""

    _ns: tuple[tuple[int, int], ...] = field(default=())

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]]) -> "IntervalSet":
        """Build a set from (start_s, end_s) pairs, merging overlaps.

        Pairs that quantize to zero or negative width are dropped.
        """
        ns = [(_to_ns(s), _to_ns(e)) for s, e in pairs]
        ns = [(s, e) for s, e in ns if e > s]
        merged, _ = _merge_ns(ns)
        return cls(tuple(merged))

    @property
    def intervals(self) -> tuple[tuple[float, float], ...]:
        return tuple((s / NS_PER_S, e / NS_PER_S) for s, e in self._ns)

    @property
    def total_duration(self) -> float:
        """Sum of interval lengths in seconds."""
        return self.duration_ns / NS_PER_S

    @property
    def duration_ns(self) -> int:
        return sum(e - s for s, e in self._ns)

    def __len__(self) -> int:
        return len(self._ns)

    def __bool__(self) -> bool:
        return bool(self._ns)

    def union(self, other: "IntervalSet") -> "IntervalSet":
        merged, _ = _merge_ns(list(self._ns) + list(other._ns))
        return IntervalSet(tuple(merged))

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        out: list[tuple[int, int]] = []
        a, b = self._ns, other._ns
        i = j = 0
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            if hi > lo:
                out.append((lo, hi))
            if a[i][1] <= b[j][1]:
                i += 1
            else:
                j += 1
        return IntervalSet(tuple(out))

    def intersection_ns(self, other: "IntervalSet") -> int:
        return self.intersect(other).duration_ns

    def span_overlap_ns(self, start_s: float, end_s: float) -> int:
        """Overlap with one span, in integer nanoseconds (exact)."""
        lo, hi = _to_ns(start_s), _to_ns(end_s)
        if hi <= lo or not self._ns:
            return 0
        # first interval whose start could still reach the span
        i = max(0, bisect_right(self._ns, (lo, lo)) - 1)
        total = 0
        for s, e in self._ns[i:]:
            if s >= hi:
                break
            total += max(0, min(e, hi) - max(s, lo))
        return total

    def span_overlap(self, start_s: float, end_s: float) -> float:
        """Overlap duration in seconds between this set and one span."""
        return self.span_overlap_ns(start_s, end_s) / NS_PER_S

    def contains(self, other: "IntervalSet") -> bool:
        """True when every interval of ``other`` lies inside this set."""
        return other.intersection_ns(self) == other.duration_ns


def iou(a: IntervalSet, b: IntervalSet) -> float:
    """Intersection-over-union of two interval sets on one timeline.

    Two empty sets agree perfectly and score 1.0.
    """
    inter = a.intersection_ns(b)
    union = a.duration_ns + b.duration_ns - inter
    if union == 0:
        return 1.0
    return inter / union


def coverage(a: IntervalSet, b: IntervalSet) -> float | None:
    """Fraction of ``a``'s duration contained in ``b``.

    Undefined (None) when ``a`` is empty; never coerced to 0 or 1.
    """
    if a.duration_ns == 0:
        return None
    return a.intersection_ns(b) / a.duration_ns


def pooled_iou(pairs: Sequence[tuple[IntervalSet, IntervalSet]]) -> float:
    """IoU over many timelines: sums intersections and unions before dividing.

    This duration-weighted pooling is how cross-recording aggregates are
    formed; per-timeline ratios are never averaged.
    """
    inter = sum(a.intersection_ns(b) for a, b in pairs)
    union = sum(
        a.duration_ns + b.duration_ns - a.intersection_ns(b) for a, b in pairs
    )
    if union == 0:
        return 1.0
    return inter / union


def pooled_coverage(pairs: Sequence[tuple[IntervalSet, IntervalSet]]) -> float | None:
    """Coverage pooled across timelines (summed before dividing)."""
    denom = sum(a.duration_ns for a, _ in pairs)
    if denom == 0:
        return None
    inter = sum(a.intersection_ns(b) for a, b in pairs)
    return inter / denom
