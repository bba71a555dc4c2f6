"""
Integer and totient kernels: gcd, totient and smallest-prime-factor sieves,
coprime residues and the floor-based strip indices.

Every routine here is exact. The only floating point is the log log
diagnostic inside verify_totient_bound.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import List, Optional, Tuple, Union

import numpy as np

from popcorn_dimension.config import load_config

logger = logging.getLogger(__name__)

# Fractions are always stored in lowest terms, which is all a reduced fraction needs.
ReducedFraction = Fraction

RationalLike = Union[int, Fraction, str]


class UndefinedInputError(ValueError):
    """Raised when an operation is undefined for its input (gcd(0, 0))."""
    pass


class RangeError(ValueError):
    """Raised when an integer or rational argument lies outside its valid range."""
    pass


class EmptyStripError(ValueError):
    """Raised when a strip index is requested for a strip that cannot exist."""
    pass


def reduced_fraction(value: RationalLike) -> Fraction:
    """
    Convert an integer, Fraction or 'p/q' string into an exact Fraction.

    Args:
        value: Exact rational input; floats are refused because they are not exact

    Returns:
        Fraction: The value in lowest terms

    Raises:
        TypeError: If value is a float, a bool or another inexact type
        ValueError: If a string does not parse as a rational
    """
    if isinstance(value, bool) or isinstance(value, float):
        raise TypeError(f"Expected an exact rational, got {type(value).__name__} {value!r}")
    if isinstance(value, str):
        text = value.strip()
        if not text or any(ch in text for ch in '.eE'):
            raise ValueError(f"Rational must be written as p/q, got {value!r}")
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"Rational must be written as p/q, got {value!r}")
    if isinstance(value, Rational):
        return Fraction(value)
    raise TypeError(f"Expected an exact rational, got {type(value).__name__} {value!r}")


def unit_mesh(delta: RationalLike, name: str = 'delta') -> Fraction:
    """Return delta as a Fraction after checking 0 < delta < 1."""
    value = reduced_fraction(delta)
    if not 0 < value < 1:
        raise RangeError(f"{name} must satisfy 0 < {name} < 1, got {value}")
    return value


def gcd(a: int, b: int) -> int:
    """
    Greatest common divisor of two nonnegative integers.

    Raises:
        RangeError: If either argument is negative
        UndefinedInputError: If both arguments are zero
    """
    if a < 0 or b < 0:
        raise RangeError(f"gcd expects nonnegative integers, got ({a}, {b})")
    if a == 0 and b == 0:
        raise UndefinedInputError("gcd(0, 0) is undefined")
    return math.gcd(a, b)


@dataclass(frozen=True)
class TotientTable:
    """Exact Euler totient values φ(n) for 1 ≤ n ≤ limit (φ(1) = 1 by convention)."""

    limit: int
    values: np.ndarray

    def __getitem__(self, n: int) -> int:
        if not 1 <= n <= self.limit:
            raise RangeError(f"n={n} is outside the table range [1, {self.limit}]")
        return int(self.values[n])

    def __len__(self) -> int:
        return self.limit

    def partial_sum(self, lo: int, hi: int) -> int:
        """Σ φ(n) for lo ≤ n ≤ hi, clipped to the table."""
        lo = max(lo, 1)
        hi = min(hi, self.limit)
        if lo > hi:
            return 0
        return int(self.values[lo:hi + 1].sum())


def _primes_upto(limit: int) -> np.ndarray:
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if is_prime[p]:
            is_prime[p * p::p] = False
    return np.flatnonzero(is_prime)


def _check_cap(limit: int, cap: Optional[int]) -> None:
    if cap is None:
        cap = load_config()['totient_cap']
    if limit > cap:
        raise RangeError(f"Sieve limit {limit} exceeds the configured cap {cap}")


def totient_sieve(limit: int, cap: Optional[int] = None) -> TotientTable:
    """
    Build a table of exact totients with the multiplicative prime sieve.

    Each prime p scales every multiple of p by (1 - 1/p), which is exact
    in integers because p divides the running value at that point.

    Args:
        limit (int): Largest n in the table, at least 2
        cap (int, optional): Upper bound on limit; defaults to POPCORN_TOTIENT_CAP

    Returns:
        TotientTable: Immutable table of 64-bit totient values

    Raises:
        RangeError: If limit < 2 or limit exceeds the cap
    """
    if limit < 2:
        raise RangeError(f"Totient sieve needs limit >= 2, got {limit}")
    _check_cap(limit, cap)

    phi = np.arange(limit + 1, dtype=np.int64)
    for p in _primes_upto(limit):
        p = int(p)
        phi[p::p] -= phi[p::p] // p
    phi.flags.writeable = False
    logger.debug(f"Built totient table up to {limit}")
    return TotientTable(limit=limit, values=phi)


def smallest_prime_factors(limit: int) -> np.ndarray:
    """
    Sieve of smallest prime factors: spf[n] is the least prime dividing n.

    spf[0] = 0 and spf[1] = 1 so the array can be indexed directly by n.
    """
    if limit < 1:
        raise RangeError(f"Smallest-prime-factor sieve needs limit >= 1, got {limit}")
    spf = np.zeros(limit + 1, dtype=np.int64)
    for p in range(2, math.isqrt(limit) + 1):
        if spf[p] == 0:
            block = spf[p * p::p]
            block[block == 0] = p
    unmarked = np.flatnonzero(spf == 0)
    spf[unmarked] = unmarked
    spf[1] = 1
    spf.flags.writeable = False
    return spf


def distinct_prime_factors(n: int, spf: np.ndarray) -> List[int]:
    """Distinct primes dividing n, ascending, read off a smallest-prime-factor table."""
    if not 1 <= n < len(spf):
        raise RangeError(f"n={n} is outside the sieve range [1, {len(spf) - 1}]")
    primes = []
    while n > 1:
        p = int(spf[n])
        primes.append(p)
        while n % p == 0:
            n //= p
    return primes


def coprime_residues(l: int) -> List[int]:
    """
    All i in [1, l-1] with gcd(i, l) = 1, ascending.

    Args:
        l (int): Modulus, at least 2

    Returns:
        list: The φ(l) residues coprime to l

    Raises:
        RangeError: If l < 2
    """
    if l < 2:
        raise RangeError(f"coprime_residues needs l >= 2, got {l}")
    candidates = np.arange(1, l, dtype=np.int64)
    return candidates[np.gcd(candidates, l) == 1].tolist()


def strip_index_L(k: int, delta: RationalLike) -> int:
    """
    L_δ(k) = floor(1/(kδ)), the highest level q whose height 1/q reaches strip k.

    Raises:
        RangeError: If k < 1 or delta is not in (0, 1)
        EmptyStripError: If kδ > 1
    """
    delta = unit_mesh(delta)
    if k < 1:
        raise RangeError(f"Strip index k must be >= 1, got {k}")
    if k * delta > 1:
        raise EmptyStripError(f"Strip k={k} lies above the unit square at delta={delta}")
    return delta.denominator // (k * delta.numerator)


def collapsed_index_Lp(k: int, n: int, delta: RationalLike) -> int:
    """
    L'_{δ,n}(k) = floor(1/(k(n+1)δ)), indexing the lines bounding collapsed strip k.

    Raises:
        RangeError: If k < 1, n < 1 or delta is not in (0, 1)
        EmptyStripError: If k(n+1)δ > 1
    """
    delta = unit_mesh(delta)
    if k < 1 or n < 1:
        raise RangeError(f"Collapsed strip needs k >= 1 and n >= 1, got k={k}, n={n}")
    if k * (n + 1) * delta > 1:
        raise EmptyStripError(f"Collapsed strip k={k}, n={n} is empty at delta={delta}")
    return delta.denominator // (k * (n + 1) * delta.numerator)


def verify_totient_bound(lo: int, hi: int, table: Optional[TotientTable] = None) -> Tuple[float, int]:
    """
    Minimum of φ(n)·log(log n)/n over lo ≤ n ≤ hi and the first n attaining it.

    The ratio is a floating point diagnostic; the totients themselves are exact.

    Raises:
        RangeError: If lo < 3 or lo >= hi
    """
    if lo < 3:
        raise RangeError(f"log log n is only positive for n >= 3, got lo={lo}")
    if lo >= hi:
        raise RangeError(f"Empty range [{lo}, {hi}]")
    if table is None or table.limit < hi:
        table = totient_sieve(hi)

    n = np.arange(lo, hi + 1, dtype=np.int64)
    ratio = table.values[lo:hi + 1] * np.log(np.log(n)) / n
    idx = int(np.argmin(ratio))
    return float(ratio[idx]), int(n[idx])


def square_estimate_ratio(a: RationalLike, b: RationalLike) -> Fraction:
    """
    (floor(a)² - ceil(b)²) / (a² - b²) for rationals a > b > 1 with a - b >= 3.

    Raises:
        RangeError: If the pair does not satisfy the preconditions
    """
    a = reduced_fraction(a)
    b = reduced_fraction(b)
    if not (a > b > 1 and a - b >= 3):
        raise RangeError(f"Square estimate needs a > b > 1 and a - b >= 3, got a={a}, b={b}")
    return Fraction(math.floor(a) ** 2 - math.ceil(b) ** 2) / (a * a - b * b)


def _power_target(x: Fraction, exponent: Fraction) -> Tuple[Fraction, int]:
    if x <= 0:
        raise RangeError(f"Base must be positive, got {x}")
    return x ** exponent.numerator, exponent.denominator


def _root_guess(target: Fraction, q: int) -> int:
    log_target = math.log(target.numerator) - math.log(target.denominator)
    return max(0, int(math.exp(log_target / q)))


def ceil_rational_power(x: RationalLike, exponent: RationalLike) -> int:
    """Smallest integer k >= 0 with k >= x**exponent, computed exactly."""
    target, q = _power_target(reduced_fraction(x), reduced_fraction(exponent))
    k = _root_guess(target, q)
    while k ** q < target:
        k += 1
    while k > 0 and (k - 1) ** q >= target:
        k -= 1
    return k


def floor_rational_power(x: RationalLike, exponent: RationalLike) -> int:
    """Largest integer k >= 0 with k <= x**exponent, computed exactly."""
    target, q = _power_target(reduced_fraction(x), reduced_fraction(exponent))
    k = _root_guess(target, q)
    while k > 0 and k ** q > target:
        k -= 1
    while (k + 1) ** q <= target:
        k += 1
    return k
