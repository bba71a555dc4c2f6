"""
Point enumerators for the popcorn graph and the full popcorn set.

Two layer structures are offered: the horizontal view groups the points
(m/q, 1/q) by denominator level q, and the collapsed view groups them by the
line y = x/l they sit on, between x = 1/(n+1) and x = 1/n.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, List

from popcorn_dimension.numtheory import (
    RangeError,
    RationalLike,
    collapsed_index_Lp,
    coprime_residues,
    reduced_fraction,
    strip_index_L,
    unit_mesh,
)

logger = logging.getLogger(__name__)


class DomainError(ValueError):
    """Raised when a coordinate lies outside [0, 1] or a point is not on the set."""
    pass


@dataclass(frozen=True)
class PopcornPoint:
    """A point (x, y) of the full popcorn set with exact coordinates."""

    x: Fraction
    y: Fraction

    def __post_init__(self):
        if not 0 <= self.x <= 1:
            raise DomainError(f"x={self.x} lies outside [0, 1]")
        if self.y > 0:
            p, q = self.x.numerator, self.x.denominator
            if not (1 <= p < q and self.y == Fraction(1, q)):
                raise DomainError(f"({self.x}, {self.y}) is not a popcorn point")
        elif self.y != 0:
            raise DomainError(f"Height must be nonnegative, got {self.y}")


@dataclass(frozen=True)
class StripSpec:
    """Strip k of height δ together with its level range (level_lo, level_hi]."""

    k: int
    delta: Fraction
    level_lo: int
    level_hi: int

    @property
    def levels(self) -> range:
        """Denominator levels q >= 2 whose points fall in this strip."""
        return range(max(self.level_lo, 1) + 1, self.level_hi + 1)

    @property
    def is_empty(self) -> bool:
        return len(self.levels) == 0

    @property
    def level_sum(self) -> int:
        """Σ q over the strip's levels; k³δ² times this stays within [1/4, 4] in the strip-lemma range."""
        levels = self.levels
        return (levels.start + levels.stop - 1) * len(levels) // 2


@dataclass(frozen=True)
class CollapsedLine:
    """The line y = x/l between x = 1/(n+1) and x = 1/n."""

    l: int
    n: int

    def __post_init__(self):
        if self.l < 2 or self.n < 1:
            raise RangeError(f"Collapsed line needs l >= 2 and n >= 1, got l={self.l}, n={self.n}")


@dataclass(frozen=True)
class CollapsedStripSpec:
    """Collapsed strip k at column n: the lines l in (line_lo, line_hi]."""

    k: int
    n: int
    delta: Fraction
    line_lo: int
    line_hi: int

    @property
    def lines(self) -> range:
        return range(max(self.line_lo, 1) + 1, self.line_hi + 1)

    @property
    def is_empty(self) -> bool:
        return len(self.lines) == 0


def popcorn_value(x: RationalLike) -> Fraction:
    """
    Value of the popcorn function at a rational x.

    Args:
        x: Any rational in [0, 1], reduced or not

    Returns:
        Fraction: 1/q when x = p/q in lowest terms with 1 <= p < q, else 0

    Raises:
        DomainError: If x lies outside [0, 1]
    """
    x = reduced_fraction(x)
    if not 0 <= x <= 1:
        raise DomainError(f"Popcorn function is defined on [0, 1], got {x}")
    p, q = x.numerator, x.denominator
    if 1 <= p < q:
        return Fraction(1, q)
    return Fraction(0)


def enumerate_level(q: int) -> List[PopcornPoint]:
    """The φ(q) points (m/q, 1/q) with gcd(m, q) = 1, ascending in x."""
    if q < 2:
        raise RangeError(f"Levels start at q = 2, got {q}")
    height = Fraction(1, q)
    return [PopcornPoint(Fraction(m, q), height) for m in coprime_residues(q)]


def enumerate_graph_points(q_max: int) -> Iterator[PopcornPoint]:
    """Stream every popcorn point with 2 <= q <= q_max, level by level."""
    if q_max < 2:
        raise RangeError(f"q_max must be >= 2, got {q_max}")
    for q in range(2, q_max + 1):
        yield from enumerate_level(q)


def level_row(q: int, delta: Fraction) -> int:
    """Index of the height-δ strip containing level q, i.e. floor(1/(qδ))."""
    return delta.denominator // (q * delta.numerator)


def _in_strip(q: int, k: int, delta: Fraction) -> bool:
    height = Fraction(1, q)
    return k * delta <= height < (k + 1) * delta


def strip_spec(k: int, delta: RationalLike) -> StripSpec:
    """
    Level range of strip k: the q with kδ <= 1/q < (k+1)δ, i.e. L_δ(k+1) < q <= L_δ(k).

    An empty strip comes back with level_lo == level_hi rather than an error.

    Raises:
        RangeError: If k < 1 or delta is not in (0, 1)
        EmptyStripError: If kδ > 1
    """
    delta = unit_mesh(delta)
    level_hi = strip_index_L(k, delta)
    # L_δ(k+1) is 0 once (k+1)δ passes 1; the floor expression gives that directly.
    level_lo = delta.denominator // ((k + 1) * delta.numerator)
    spec = StripSpec(k=k, delta=delta, level_lo=level_lo, level_hi=level_hi)

    for q in {level_lo + 1, level_hi}:
        if level_lo < q <= level_hi and not _in_strip(q, k, delta):
            raise RuntimeError(f"Level {q} does not belong to strip {k} at delta={delta}")
    return spec


def collapsed_line_points(line: CollapsedLine) -> List[PopcornPoint]:
    """Points (l/(ln+i), 1/(ln+i)) with gcd(i, l) = 1, descending in x."""
    base = line.l * line.n
    return [
        PopcornPoint(Fraction(line.l, base + i), Fraction(1, base + i))
        for i in coprime_residues(line.l)
    ]


def collapsed_strip_spec(k: int, n: int, delta: RationalLike) -> CollapsedStripSpec:
    """Lines l with kδ <= 1/(l(n+1)) < (k+1)δ, i.e. L'(k+1) < l <= L'(k)."""
    delta = unit_mesh(delta)
    line_hi = collapsed_index_Lp(k, n, delta)
    line_lo = delta.denominator // ((k + 1) * (n + 1) * delta.numerator)
    return CollapsedStripSpec(k=k, n=n, delta=delta, line_lo=line_lo, line_hi=line_hi)


def collapsed_strip_points(spec: CollapsedStripSpec) -> List[PopcornPoint]:
    """All points on the strip's lines, ascending in x."""
    points = []
    for l in spec.lines:
        points.extend(collapsed_line_points(CollapsedLine(l, spec.n)))
    points.sort(key=lambda point: point.x)
    return points
