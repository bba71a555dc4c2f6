"""
Exact interval-union arithmetic on [0, 1] with rational endpoints.

Houses the Diophantine neighbourhoods E_n and F_{S(l,n)}(δ), their Lebesgue
measures and intersections, and the Chung-Erdős lower bound. No floating
point is used anywhere in this module.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, List, Sequence, Tuple

from popcorn_dimension.numtheory import RangeError, RationalLike, coprime_residues, reduced_fraction

logger = logging.getLogger(__name__)

ZERO = Fraction(0)
ONE = Fraction(1)


class MalformedIntervalError(ValueError):
    """Raised when an interval has lo > hi."""
    pass


class PositiveEventError(ValueError):
    """Raised when the Chung-Erdős bound receives an event of measure zero."""
    pass


@dataclass(frozen=True)
class Interval:
    """A closed interval [lo, hi] with rational endpoints."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if type(self.lo) is not Fraction:
            object.__setattr__(self, 'lo', reduced_fraction(self.lo))
        if type(self.hi) is not Fraction:
            object.__setattr__(self, 'hi', reduced_fraction(self.hi))
        if self.lo > self.hi:
            raise MalformedIntervalError(f"Interval has lo > hi: [{self.lo}, {self.hi}]")

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo


@dataclass(frozen=True)
class IntervalUnion:
    """Sorted, pairwise strictly disjoint closed intervals inside [0, 1]."""

    parts: Tuple[Interval, ...] = ()

    def __iter__(self) -> Iterator[Interval]:
        return iter(self.parts)

    def __len__(self) -> int:
        return len(self.parts)

    def __bool__(self) -> bool:
        return bool(self.parts)

    def measure(self) -> Fraction:
        return measure(self)


def _clip(interval: Interval):
    lo = max(interval.lo, ZERO)
    hi = min(interval.hi, ONE)
    if lo > hi:
        return None
    return lo, hi


def normalize(intervals: Iterable[Interval]) -> IntervalUnion:
    """
    Clip intervals to [0, 1], sort them and merge every overlap.

    Closed intervals that share an endpoint are merged. A point interval is
    kept unless it falls inside (or touches) another part.

    Args:
        intervals: Any iterable of Interval objects

    Returns:
        IntervalUnion: The canonical union covering the same point set

    Raises:
        MalformedIntervalError: If a raw (lo, hi) pair has lo > hi
    """
    clipped = []
    for interval in intervals:
        if not isinstance(interval, Interval):
            interval = Interval(*interval)
        bounds = _clip(interval)
        if bounds is not None:
            clipped.append(bounds)
    clipped.sort()

    merged: List[List[Fraction]] = []
    for lo, hi in clipped:
        if merged and lo <= merged[-1][1]:
            if hi > merged[-1][1]:
                merged[-1][1] = hi
        else:
            merged.append([lo, hi])
    return IntervalUnion(tuple(Interval(lo, hi) for lo, hi in merged))


def measure(u: IntervalUnion) -> Fraction:
    """Exact Lebesgue measure of a normalized union."""
    return sum((part.hi - part.lo for part in u.parts), ZERO)


def intersect(a: IntervalUnion, b: IntervalUnion) -> IntervalUnion:
    """
    Set intersection of two normalized unions by a two-pointer sweep.

    Both inputs are strictly disjoint and sorted, so the pieces produced are
    already in canonical order.
    """
    parts = []
    i = j = 0
    left, right = a.parts, b.parts
    while i < len(left) and j < len(right):
        lo = max(left[i].lo, right[j].lo)
        hi = min(left[i].hi, right[j].hi)
        if lo <= hi:
            parts.append(Interval(lo, hi))
        if left[i].hi < right[j].hi:
            i += 1
        else:
            j += 1
    return IntervalUnion(tuple(parts))


def intersection_measure(a: IntervalUnion, b: IntervalUnion) -> Fraction:
    """μ(a ∩ b) without materializing the intersection."""
    total = ZERO
    i = j = 0
    left, right = a.parts, b.parts
    while i < len(left) and j < len(right):
        lo = max(left[i].lo, right[j].lo)
        hi = min(left[i].hi, right[j].hi)
        if lo < hi:
            total += hi - lo
        if left[i].hi < right[j].hi:
            i += 1
        else:
            j += 1
    return total


def union(*unions: IntervalUnion) -> IntervalUnion:
    """Normalized union of several interval unions."""
    return normalize(part for u in unions for part in u.parts)


def _neighbourhoods(centers: Iterable[Fraction], half_width: Fraction) -> IntervalUnion:
    return normalize(Interval(c - half_width, c + half_width) for c in centers)


def build_E_n(n: int, delta: RationalLike) -> IntervalUnion:
    """
    E_n: the union of [m/n - δ, m/n + δ] ∩ [0, 1] over m coprime to n.

    The half-width δ is ψ(n)/n with ψ(n) = nδ; any other ψ is handled by
    passing ψ(n)/n as delta.

    Raises:
        RangeError: If n < 2 or delta is not in (0, 1)
    """
    if n < 2:
        raise RangeError(f"E_n needs n >= 2, got {n}")
    delta = reduced_fraction(delta)
    if not 0 < delta < 1:
        raise RangeError(f"Half-width must lie in (0, 1), got {delta}")
    return _neighbourhoods((Fraction(m, n) for m in coprime_residues(n)), delta)


def build_F_l(l: int, n: int, delta: RationalLike) -> IntervalUnion:
    """
    F_{S(l,n)}(δ): δ-neighbourhoods of the x-coordinates l/(ln+i), gcd(i, l) = 1.

    Raises:
        RangeError: If l < 2, n < 1 or delta is not in (0, 1)
    """
    if l < 2:
        raise RangeError(f"F_l needs l >= 2, got {l}")
    if n < 1:
        raise RangeError(f"F_l needs n >= 1, got {n}")
    delta = reduced_fraction(delta)
    if not 0 < delta < 1:
        raise RangeError(f"Half-width must lie in (0, 1), got {delta}")
    return _neighbourhoods((Fraction(l, l * n + i) for i in coprime_residues(l)), delta)


def chung_erdos_bound(events: Sequence[IntervalUnion]) -> Fraction:
    """
    The Chung-Erdős lower bound (Σ μ(A_i))² / Σ_i Σ_j μ(A_i ∩ A_j).

    The double sum runs over ordered pairs and includes the diagonal, so the
    off-diagonal terms are computed once and counted twice.

    Args:
        events: Normalized unions, each of positive measure

    Returns:
        Fraction: A lower bound for the measure of the union of the events

    Raises:
        PositiveEventError: If the list is empty or an event has measure zero
    """
    if not events:
        raise PositiveEventError("Chung-Erdős bound needs at least one event")
    measures = [measure(event) for event in events]
    for index, value in enumerate(measures):
        if value <= 0:
            raise PositiveEventError(f"Event {index} has measure {value}; events must be positive")

    overlap = sum(measures, ZERO)
    for i in range(len(events)):
        for j in range(i + 1, len(events)):
            overlap += 2 * intersection_measure(events[i], events[j])
    total = sum(measures, ZERO)
    return total * total / overlap
