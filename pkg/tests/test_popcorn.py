"""
Tests for the popcorn function and its point enumerators.
"""

from fractions import Fraction

import pytest

from popcorn_dimension.numtheory import RangeError, floor_rational_power, totient_sieve
from popcorn_dimension.popcorn import (
    CollapsedLine,
    DomainError,
    PopcornPoint,
    collapsed_line_points,
    collapsed_strip_points,
    collapsed_strip_spec,
    enumerate_graph_points,
    enumerate_level,
    level_row,
    popcorn_value,
    strip_spec,
)


def test_popcorn_value():
    """Test the function on reduced, unreduced and boundary inputs."""
    assert popcorn_value('2/4') == Fraction(1, 2)
    assert popcorn_value('3/7') == Fraction(1, 7)
    assert popcorn_value(0) == 0
    assert popcorn_value(1) == 0
    with pytest.raises(DomainError):
        popcorn_value('3/2')


def test_popcorn_point_validation():
    """Test that only points of the full popcorn set are accepted."""
    PopcornPoint(Fraction(2, 5), Fraction(1, 5))
    PopcornPoint(Fraction(1, 3), Fraction(0))
    with pytest.raises(DomainError):
        PopcornPoint(Fraction(2, 5), Fraction(1, 4))
    with pytest.raises(DomainError):
        PopcornPoint(Fraction(3, 2), Fraction(0))
    with pytest.raises(DomainError):
        PopcornPoint(Fraction(1, 2), Fraction(-1, 2))


def test_enumerate_level():
    """Test the points of level 6."""
    points = enumerate_level(6)
    assert [(p.x, p.y) for p in points] == [(Fraction(1, 6), Fraction(1, 6)), (Fraction(5, 6), Fraction(1, 6))]
    with pytest.raises(RangeError):
        enumerate_level(1)


def test_enumerate_graph_points_counts():
    """Test that q_max = 5 yields the 9 points and every level has φ(q) points."""
    points = list(enumerate_graph_points(5))
    assert len(points) == 9
    table = totient_sieve(50)
    assert sum(1 for _ in enumerate_graph_points(50)) == table.partial_sum(2, 50)


def test_enumerate_graph_points_order():
    """Test level-major order with x ascending inside a level."""
    points = list(enumerate_graph_points(4))
    assert [p.x for p in points] == [Fraction(1, 2), Fraction(1, 3), Fraction(2, 3), Fraction(1, 4), Fraction(3, 4)]


def test_level_row():
    """Test the row index floor(1/(qδ))."""
    delta = Fraction(1, 4)
    assert level_row(2, delta) == 2
    assert level_row(3, delta) == 1
    assert level_row(4, delta) == 1
    assert level_row(5, delta) == 0


def test_strip_spec_ranges():
    """Test the level ranges (L(k+1), L(k)] of a few strips."""
    spec = strip_spec(1, '1/100')
    assert (spec.level_lo, spec.level_hi) == (50, 100)
    assert list(spec.levels)[:2] == [51, 52]
    spec = strip_spec(3, '1/100')
    assert (spec.level_lo, spec.level_hi) == (25, 33)
    assert len(spec.levels) == 8


def test_strip_spec_levels_lie_in_strip():
    """Test that every level of every strip has height in [kδ, (k+1)δ)."""
    delta = Fraction(1, 37)
    for k in range(1, 38):
        spec = strip_spec(k, delta)
        for q in spec.levels:
            assert k * delta <= Fraction(1, q) < (k + 1) * delta


def test_strip_spec_top_strip_and_empty():
    """Test the topmost strip and an empty strip."""
    top = strip_spec(2, '1/4')
    assert list(top.levels) == [2]
    empty = strip_spec(5, '1/12')
    assert empty.is_empty


def test_strip_level_sum():
    """Test the closed-form level sum against a direct sum."""
    spec = strip_spec(3, '1/100')
    assert spec.level_sum == sum(range(26, 34))
    assert strip_spec(5, '1/12').level_sum == 0


def test_strip_level_sums_scale_like_inverse_k_cubed():
    """Test k³δ²·Σq in [1/4, 4] for every strip k <= δ^(-9/20) at δ = 10^-6."""
    delta = Fraction(1, 10 ** 6)
    k_max = floor_rational_power(delta, Fraction(-9, 20))
    assert k_max == 501
    for k in range(1, k_max + 1):
        scaled = k ** 3 * delta ** 2 * strip_spec(k, delta).level_sum
        assert Fraction(1, 4) <= scaled <= 4


def test_collapsed_lines_sit_left_of_one_half():
    """Test that S(l, n) lies in (1/(n+1), 1/n), hence in (0, 1/2] once n >= 2."""
    for n in range(1, 8):
        for l in range(2, 40):
            xs = [p.x for p in collapsed_line_points(CollapsedLine(l, n))]
            assert all(Fraction(1, n + 1) < x < Fraction(1, n) for x in xs)
            if n >= 2:
                assert all(0 < x <= Fraction(1, 2) for x in xs)
            else:
                assert all(Fraction(1, 2) < x < 1 for x in xs)


def test_collapsed_line_points():
    """Test points on y = x/l and that they sit on the line."""
    points = collapsed_line_points(CollapsedLine(3, 2))
    assert [p.x for p in points] == [Fraction(3, 7), Fraction(3, 8)]
    for p in points:
        assert p.y == p.x / 3
        assert Fraction(1, 3) < p.x < Fraction(1, 2)
    with pytest.raises(RangeError):
        CollapsedLine(1, 2)


def test_collapsed_strip():
    """Test that a collapsed strip gathers its lines in ascending x."""
    spec = collapsed_strip_spec(1, 2, '1/60')
    assert (spec.line_lo, spec.line_hi) == (10, 20)
    points = collapsed_strip_points(spec)
    xs = [p.x for p in points]
    assert xs == sorted(xs)
    for p in points:
        assert Fraction(1, 3) < p.x < Fraction(1, 2)
    for l in spec.lines:
        assert spec.delta <= Fraction(1, l * 3) < 2 * spec.delta
    table = totient_sieve(20)
    assert len(points) == sum(table[l] for l in range(11, 21))
