"""
Exact grid-cover counting for the full popcorn set.

The counters visit each popcorn point once, level by level, and mark its
column in a reusable per-row bitset. A point at height 1/q < δ sits in row 0,
which the base segment [0, 1] x {0} already fills, so enumerating levels
q <= floor(1/δ) gives exact counts rather than approximations.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from popcorn_dimension.config import load_config
from popcorn_dimension.numtheory import (
    RangeError,
    RationalLike,
    ceil_rational_power,
    distinct_prime_factors,
    reduced_fraction,
    smallest_prime_factors,
    totient_sieve,
)
from popcorn_dimension.popcorn import PopcornPoint, strip_spec

logger = logging.getLogger(__name__)

MESH_FLOOR = Fraction(1, 2 ** 30)
_INT64_SAFE = 2 ** 62
MODES = ('full', 'graph')

PointLike = Union[PopcornPoint, Tuple[Fraction, Fraction]]


class MeshError(ValueError):
    """Raised when a grid mesh is too coarse or too fine to count with."""
    pass


class ScaleOrderError(ValueError):
    """Raised when a window mesh is not strictly smaller than the window."""
    pass


class OracleTooLargeError(ValueError):
    """Raised when the brute-force oracle would visit too many points."""
    pass


class CostGuardError(RuntimeError):
    """Raised when an enumeration would exceed its configured budget."""

    def __init__(self, message: str, parameter: str, value):
        super().__init__(message)
        self.parameter = parameter
        self.value = value


class CountMethod(str, Enum):
    STRIP_FAST = 'strip-fast'
    BRUTE_ORACLE = 'brute-oracle'


class RegionKind(str, Enum):
    FULL_SQUARE = 'full-square'
    STRIP = 'strip'
    WINDOW = 'window'


@dataclass(frozen=True)
class Region:
    """
    Where a cover is counted: the unit square, one row band, or a window C(x, R).

    A window is the closed square [x0, x0+R] x [y0, y0+R]; its grid is anchored
    at (x0, y0) and the last row and column absorb the closed top and right edges.
    """

    kind: RegionKind
    k: Optional[int] = None
    x0: Fraction = Fraction(0)
    y0: Fraction = Fraction(0)
    size: Fraction = Fraction(1)

    def __post_init__(self):
        for name in ('x0', 'y0', 'size'):
            object.__setattr__(self, name, reduced_fraction(getattr(self, name)))
        if self.kind == RegionKind.STRIP and (self.k is None or self.k < 0):
            raise RangeError(f"Strip region needs k >= 0, got {self.k}")
        if self.kind == RegionKind.WINDOW:
            if self.size <= 0:
                raise RangeError(f"Window size must be positive, got {self.size}")
            if not (0 <= self.x0 and self.x0 + self.size <= 1 and self.y0 >= 0):
                raise RangeError(
                    f"Window must satisfy 0 <= x0 <= x0+R <= 1 and y0 >= 0, "
                    f"got x0={self.x0}, y0={self.y0}, R={self.size}"
                )

    @classmethod
    def full_square(cls) -> 'Region':
        return cls(RegionKind.FULL_SQUARE)

    @classmethod
    def strip(cls, k: int) -> 'Region':
        return cls(RegionKind.STRIP, k=k)

    @classmethod
    def window(cls, x0: RationalLike, y0: RationalLike, size: RationalLike) -> 'Region':
        return cls(RegionKind.WINDOW, x0=x0, y0=y0, size=size)

    def describe(self) -> str:
        if self.kind == RegionKind.STRIP:
            return f"strip({self.k})"
        if self.kind == RegionKind.WINDOW:
            return f"window({self.x0},{self.y0},{self.size})"
        return self.kind.value


@dataclass(frozen=True)
class CoverReport:
    """An exact occupied-cell count together with how it was obtained."""

    region: Region
    mesh: Fraction
    count: int
    method: CountMethod
    q_max: int
    mode: str = 'full'

    def as_row(self) -> dict:
        return {
            'mesh_num': self.mesh.numerator,
            'mesh_den': self.mesh.denominator,
            'count': self.count,
            'method': self.method.value,
            'q_max': self.q_max,
        }


def _grid_mesh(delta: RationalLike) -> Fraction:
    delta = reduced_fraction(delta)
    if delta <= 0:
        raise MeshError(f"Mesh must be positive, got {delta}")
    if delta > Fraction(1, 2):
        raise MeshError(f"Mesh {delta} is too coarse; the row structure needs delta <= 1/2")
    if delta < MESH_FLOOR:
        raise MeshError(f"Mesh {delta} is below the floor 2^-30")
    if delta.denominator * delta.denominator // delta.numerator >= _INT64_SAFE:
        raise MeshError(f"Mesh {delta} has too large a denominator for 64-bit column indices")
    return delta


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"Mode must be one of {MODES}, got {mode!r}")


def _cells_per_side(extent: Fraction, mesh: Fraction) -> int:
    return math.ceil(extent / mesh)


def _resolve(value, key: str):
    return load_config()[key] if value is None else value


@lru_cache(maxsize=4)
def _spf_table(limit: int) -> np.ndarray:
    return smallest_prime_factors(max(limit, 2))


def _coprime_mask(m_lo: int, m_hi: int, primes: Sequence[int]) -> np.ndarray:
    """Boolean mask over m_lo..m_hi marking the m coprime to the level."""
    mask = np.ones(m_hi - m_lo + 1, dtype=bool)
    for p in primes:
        mask[(-m_lo) % p::p] = False
    return mask


class _RowOccupancy:
    """Column occupancy of the current grid row, reused from row to row."""

    def __init__(self, ncols: int):
        self.ncols = ncols
        self.bits = np.zeros(ncols, dtype=bool)
        self.pieces: List[np.ndarray] = []
        self.size = 0
        self.dense = False

    def add(self, cols: np.ndarray) -> None:
        if self.dense:
            self.bits[cols] = True
            return
        self.pieces.append(cols)
        self.size += cols.size
        if self.size > self.ncols // 16:
            self._spill()

    def _spill(self) -> None:
        for piece in self.pieces:
            self.bits[piece] = True
        self.pieces = []
        self.dense = True

    def count(self) -> int:
        if self.dense:
            return int(np.count_nonzero(self.bits))
        if not self.pieces:
            return 0
        return int(np.unique(np.concatenate(self.pieces)).size)

    def packed(self) -> np.ndarray:
        self._spill()
        return np.packbits(self.bits)

    def reset(self) -> None:
        if self.dense:
            self.bits[:] = False
        self.pieces = []
        self.size = 0
        self.dense = False


def _level_columns(q: int, a: int, b: int, primes: Sequence[int]) -> np.ndarray:
    """Columns floor(m/(qδ)) of the reduced fractions m/q, with δ = a/b."""
    m = np.flatnonzero(_coprime_mask(0, q - 1, primes))
    return (m * b) // (q * a)


def _scan_levels(task: Tuple[int, int, int, int, int, int, bool]):
    """
    Count occupied columns row by row over the levels q_lo < q <= q_hi.

    Rows are visited in increasing order (q decreasing). A partial task covers
    part of a single row and returns its packed bitset for the caller to merge.
    """
    a, b, ncols, spf_limit, q_lo, q_hi, partial = task
    spf = _spf_table(spf_limit)
    occupancy = _RowOccupancy(ncols)
    results = []
    current_row = None
    for q in range(q_hi, q_lo, -1):
        row = b // (q * a)
        if row != current_row and current_row is not None:
            results.append((current_row, occupancy.count(), None))
            occupancy.reset()
        current_row = row
        occupancy.add(_level_columns(q, a, b, distinct_prime_factors(q, spf)))
    if current_row is not None:
        if partial:
            results.append((current_row, None, occupancy.packed()))
        else:
            results.append((current_row, occupancy.count(), None))
    return results


def _strip_ranges(delta: Fraction, q_top: int) -> List[Tuple[int, int]]:
    """Level ranges (lo, hi] of the nonempty strips below level q_top, by increasing row."""
    a, b = delta.numerator, delta.denominator
    ranges = []
    q_hi = q_top
    while q_hi >= 2:
        k = b // (q_hi * a)
        q_lo = max(b // ((k + 1) * a), 1)
        ranges.append((q_lo, q_hi))
        q_hi = q_lo
    return ranges


def _level_cost(lo: int, hi: int) -> int:
    return (hi * (hi + 1) - lo * (lo + 1)) // 2


def _plan_tasks(delta: Fraction, ranges: List[Tuple[int, int]], workers: int):
    """Group whole strips into tasks of similar cost; split strips that are too big."""
    a, b = delta.numerator, delta.denominator
    ncols = _cells_per_side(Fraction(1), delta)
    spf_limit = max(hi for _, hi in ranges)
    if workers <= 1:
        return [(a, b, ncols, spf_limit, ranges[-1][0], ranges[0][1], False)]

    total = sum(_level_cost(lo, hi) for lo, hi in ranges)
    target = max(total // (workers * 4), 4096)
    tasks = []
    batch_lo = batch_hi = None
    batch_cost = 0
    for lo, hi in ranges:
        cost = _level_cost(lo, hi)
        if cost > target:
            if batch_hi is not None:
                tasks.append((a, b, ncols, spf_limit, batch_lo, batch_hi, False))
                batch_lo = batch_hi = None
                batch_cost = 0
            chunks = -(-cost // target)
            bounds = [hi]
            for i in range(1, chunks):
                cut = math.isqrt(hi * hi - i * (hi * hi - lo * lo) // chunks)
                if lo < cut < bounds[-1]:
                    bounds.append(cut)
            bounds.append(lo)
            for upper, lower in zip(bounds, bounds[1:]):
                tasks.append((a, b, ncols, spf_limit, lower, upper, True))
            continue
        if batch_hi is None:
            batch_hi = hi
        batch_lo = lo
        batch_cost += cost
        if batch_cost >= target:
            tasks.append((a, b, ncols, spf_limit, batch_lo, batch_hi, False))
            batch_lo = batch_hi = None
            batch_cost = 0
    if batch_hi is not None:
        tasks.append((a, b, ncols, spf_limit, batch_lo, batch_hi, False))
    logger.debug(f"Planned {len(tasks)} strip tasks for {workers} workers at mesh {delta}")
    return tasks


def _run_tasks(tasks, workers: int, ncols: int) -> List[Tuple[int, int]]:
    """Execute strip tasks and fold their results into (row, count) pairs in row order."""
    counts = []
    pending_row = None
    pending = None

    def flush():
        if pending_row is not None:
            counts.append((pending_row, int(np.unpackbits(pending, count=ncols).sum())))

    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            outputs = list(executor.map(_scan_levels, tasks))
    else:
        outputs = map(_scan_levels, tasks)

    for output in outputs:
        for row, count, packed in output:
            if packed is None:
                flush()
                pending_row, pending = None, None
                counts.append((row, count))
            elif row == pending_row:
                np.bitwise_or(pending, packed, out=pending)
            else:
                flush()
                pending_row, pending = row, packed.copy()
    flush()
    return counts


def _estimated_points(q_max: int) -> int:
    # Σ_{q <= Q} φ(q) ~ 3Q²/π²
    return int(3 * q_max * q_max / math.pi ** 2)


def _guard(estimate: int, ceiling: int, parameter: str, value) -> None:
    if estimate > ceiling:
        raise CostGuardError(
            f"Enumeration needs about {estimate:,} point visits, above the ceiling {ceiling:,} "
            f"({parameter}={value})",
            parameter=parameter,
            value=value,
        )


def strip_row_counts(delta: RationalLike, workers: Optional[int] = None,
                     cost_guard: Optional[int] = None) -> List[Tuple[int, int]]:
    """Occupied cells of every nonempty row k >= 1, as (k, count) pairs."""
    delta = _grid_mesh(delta)
    workers = _resolve(workers, 'workers')
    q_max = delta.denominator // delta.numerator
    _guard(_estimated_points(q_max), _resolve(cost_guard, 'count_guard'), 'mesh', delta)
    ranges = _strip_ranges(delta, q_max)
    if not ranges:
        return []
    tasks = _plan_tasks(delta, ranges, workers)
    return _run_tasks(tasks, workers, _cells_per_side(Fraction(1), delta))


def grid_count_full_set(delta: RationalLike, mode: str = 'full', workers: Optional[int] = None,
                        cost_guard: Optional[int] = None) -> CoverReport:
    """
    Number of half-open δ-grid cells of [0, 1]² meeting the full popcorn set.

    Row 0 contributes ceil(1/δ) cells through the base segment. In graph mode
    the irrational points at height 0 are dense in [0, 1] and fill row 0 just
    the same, so both modes give identical counts.

    Args:
        delta: Mesh, a rational in (0, 1/2] no smaller than 2^-30
        mode (str): 'full' for the full popcorn set, 'graph' for the popcorn graph
        workers (int, optional): Worker processes; defaults to POPCORN_WORKERS
        cost_guard (int, optional): Point-visit ceiling; defaults to POPCORN_COUNT_GUARD

    Returns:
        CoverReport: The exact count with method 'strip-fast'

    Raises:
        MeshError: If the mesh is coarser than 1/2 or finer than 2^-30
        CostGuardError: If the enumeration exceeds the ceiling
    """
    _check_mode(mode)
    delta = _grid_mesh(delta)
    ncols = _cells_per_side(Fraction(1), delta)
    rows = strip_row_counts(delta, workers=workers, cost_guard=cost_guard)
    count = ncols + sum(count for _, count in rows)
    q_max = delta.denominator // delta.numerator
    logger.info(f"Mesh {delta}: {count} occupied cells over {len(rows) + 1} rows (q_max={q_max})")
    return CoverReport(Region.full_square(), delta, count, CountMethod.STRIP_FAST, q_max, mode)


def grid_count_strip(k: int, delta: RationalLike, mode: str = 'full',
                     workers: Optional[int] = None) -> CoverReport:
    """
    Occupied cells in the row band [kδ, (k+1)δ).

    Row 0 is filled by the base segment; rows above the unit square are empty.
    """
    _check_mode(mode)
    delta = _grid_mesh(delta)
    if k < 0:
        raise RangeError(f"Strip index must be >= 0, got {k}")
    ncols = _cells_per_side(Fraction(1), delta)
    if k == 0:
        return CoverReport(Region.strip(0), delta, ncols, CountMethod.STRIP_FAST,
                           delta.denominator // delta.numerator, mode)
    if k * delta > 1:
        return CoverReport(Region.strip(k), delta, 0, CountMethod.STRIP_FAST, 0, mode)

    spec = strip_spec(k, delta)
    if spec.is_empty:
        return CoverReport(Region.strip(k), delta, 0, CountMethod.STRIP_FAST, spec.level_hi, mode)
    ranges = [(max(spec.level_lo, 1), spec.level_hi)]
    workers = _resolve(workers, 'workers')
    counts = _run_tasks(_plan_tasks(delta, ranges, workers), workers, ncols)
    count = sum(count for _, count in counts)
    return CoverReport(Region.strip(k), delta, count, CountMethod.STRIP_FAST, spec.level_hi, mode)


def window_level_range(region: Region, r: Fraction) -> Tuple[int, int]:
    """Levels q whose height 1/q can fall inside the window and above the base row."""
    top = region.y0 + region.size
    q_lo = max(2, math.ceil(1 / top))
    if region.y0 == 0:
        q_hi = math.floor(1 / r)
    else:
        q_hi = math.floor(1 / region.y0)
    return q_lo, q_hi


def window_cost(region: Region, r: Fraction) -> int:
    """Approximate number of candidate numerators visited by grid_count_window."""
    q_lo, q_hi = window_level_range(region, r)
    if q_hi < q_lo:
        return 0
    return int(region.size * (q_hi * q_hi - q_lo * q_lo) / 2) + (q_hi - q_lo + 1)


def grid_count_window(region: Region, r: RationalLike, cost_guard: Optional[int] = None) -> CoverReport:
    """
    Occupied r-grid cells in a window C(x, R) = [x0, x0+R] x [y0, y0+R].

    The grid is anchored at the window corner. Base-segment cells are included
    when the window touches height 0; otherwise only popcorn points count.

    Args:
        region (Region): A window region
        r: Mesh, a rational with 0 < r < R
        cost_guard (int, optional): Candidate ceiling; defaults to POPCORN_SPECTRUM_GUARD

    Returns:
        CoverReport: Exact count with truncation q_max recorded

    Raises:
        ScaleOrderError: If r >= R
        CostGuardError: If the window needs too many candidate visits
    """
    if region.kind != RegionKind.WINDOW:
        raise ValueError(f"grid_count_window needs a window region, got {region.describe()}")
    r = reduced_fraction(r)
    if not 0 < r < region.size:
        raise ScaleOrderError(f"Window mesh must satisfy 0 < r < R, got r={r}, R={region.size}")
    _guard(window_cost(region, r), _resolve(cost_guard, 'spectrum_guard'), 'window', region.describe())

    ncols = _cells_per_side(region.size, r)
    nrows = ncols
    with_base = region.y0 == 0
    q_lo, q_hi = window_level_range(region, r)

    xn, xd = region.x0.numerator, region.x0.denominator
    rn, rd = r.numerator, r.denominator
    right = region.x0 + region.size
    top = region.y0 + region.size
    dtype = np.int64 if max(q_hi * xd * rd, q_hi * xd * rn) < _INT64_SAFE else object

    spf = _spf_table(q_hi) if q_hi >= 2 else None
    occupancy = _RowOccupancy(ncols)
    count = ncols if with_base else 0
    current_row = None
    for q in range(q_hi, q_lo - 1, -1):
        height = Fraction(1, q)
        if height < region.y0 or height > top:
            continue
        row = min(math.floor((height - region.y0) / r), nrows - 1)
        if with_base and row == 0:
            continue
        m_lo = max(1, math.ceil(region.x0 * q))
        m_hi = min(q - 1, math.floor(right * q))
        if m_lo > m_hi:
            continue
        if row != current_row and current_row is not None:
            count += occupancy.count()
            occupancy.reset()
        current_row = row
        mask = _coprime_mask(m_lo, m_hi, distinct_prime_factors(q, spf))
        m = np.arange(m_lo, m_hi + 1, dtype=np.int64)[mask].astype(dtype)
        cols = ((m * xd - q * xn) * rd) // (q * xd * rn)
        occupancy.add(np.minimum(cols, ncols - 1).astype(np.int64))
    if current_row is not None:
        count += occupancy.count()

    return CoverReport(region, r, count, CountMethod.STRIP_FAST, q_hi)


def _oracle_cell(region: Region, mesh: Fraction, x: Fraction, y: Fraction):
    if region.kind == RegionKind.WINDOW:
        if not (region.x0 <= x <= region.x0 + region.size and region.y0 <= y <= region.y0 + region.size):
            return None
        side = _cells_per_side(region.size, mesh)
        return (min((x - region.x0) // mesh, side - 1), min((y - region.y0) // mesh, side - 1))
    side = _cells_per_side(Fraction(1), mesh)
    cell = (min(x // mesh, side - 1), min(y // mesh, side - 1))
    if region.kind == RegionKind.STRIP and cell[1] != region.k:
        return None
    return cell


def brute_force_count(delta: RationalLike, q_max: int, region: Region,
                      oracle_guard: Optional[int] = None) -> CoverReport:
    """
    Reference count: floor-index every point with q <= q_max into a set.

    Independent of the strip machinery (plain gcd tests and Fraction floors),
    so it serves as the oracle for the fast counters.

    Raises:
        OracleTooLargeError: If Σ φ(q) for q <= q_max exceeds the oracle guard
    """
    mesh = reduced_fraction(delta)
    if not 0 < mesh < 1:
        raise MeshError(f"Oracle mesh must lie in (0, 1), got {mesh}")
    guard = _resolve(oracle_guard, 'oracle_guard')
    visits = totient_sieve(q_max).partial_sum(2, q_max) if q_max >= 2 else 0
    if visits > guard:
        raise OracleTooLargeError(f"Oracle would visit {visits:,} points, above the guard {guard:,}")

    cells = set()
    base_row = (
        region.kind == RegionKind.FULL_SQUARE
        or (region.kind == RegionKind.STRIP and region.k == 0)
        or (region.kind == RegionKind.WINDOW and region.y0 == 0)
    )
    if base_row:
        extent = region.size if region.kind == RegionKind.WINDOW else Fraction(1)
        cells.update((i, 0) for i in range(_cells_per_side(extent, mesh)))

    for q in range(2, q_max + 1):
        y = Fraction(1, q)
        for m in range(1, q):
            if math.gcd(m, q) != 1:
                continue
            cell = _oracle_cell(region, mesh, Fraction(m, q), y)
            if cell is not None:
                cells.add(cell)
    return CoverReport(region, mesh, len(cells), CountMethod.BRUTE_ORACLE, q_max)


def _coordinates(point: PointLike) -> Tuple[Fraction, Fraction]:
    if isinstance(point, PopcornPoint):
        return point.x, point.y
    x, y = point
    return reduced_fraction(x), reduced_fraction(y)


def grid_count_points(points: Iterable[PointLike], mesh: RationalLike) -> int:
    """Distinct half-open mesh cells, anchored at the origin, met by a finite point list."""
    mesh = reduced_fraction(mesh)
    if mesh <= 0:
        raise MeshError(f"Mesh must be positive, got {mesh}")
    cells = set()
    for point in points:
        x, y = _coordinates(point)
        cells.add((x // mesh, y // mesh))
    return len(cells)


def separated_count(points: Iterable[PointLike], r: RationalLike) -> int:
    """
    Size of a greedy maximal r-separated subset (pairwise distance > r).

    Points are taken in the given order; a point joins when no accepted point
    lies within distance r. Accepted points are hashed into r-cells so only
    the 3x3 neighbouring cells need an exact squared-distance test.
    """
    r = reduced_fraction(r)
    if r <= 0:
        raise RangeError(f"Separation must be positive, got {r}")
    radius_sq = r * r
    buckets = {}
    accepted = 0
    for point in points:
        x, y = _coordinates(point)
        cx, cy = x // r, y // r
        clear = True
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for ox, oy in buckets.get((cx + dx, cy + dy), ()):
                    if (x - ox) ** 2 + (y - oy) ** 2 <= radius_sq:
                        clear = False
                        break
                if not clear:
                    break
            if not clear:
                break
        if clear:
            buckets.setdefault((cx, cy), []).append((x, y))
            accepted += 1
    return accepted


def grid_count_reciprocal_set(delta: RationalLike) -> CoverReport:
    """
    Occupied δ-cells of the demo set {(1/n, 0) : n >= 1}, whose box dimension is 1/2.

    Every point sits in row 0; for n > 1/δ the points crowd into column 0.
    """
    delta = _grid_mesh(delta)
    a, b = delta.numerator, delta.denominator
    ncols = _cells_per_side(Fraction(1), delta)
    q_max = b // a
    n = np.arange(1, q_max + 1, dtype=np.int64)
    cols = np.minimum(b // (n * a), ncols - 1)
    count = int(np.unique(np.append(cols, 0)).size)
    return CoverReport(Region.full_square(), delta, count, CountMethod.STRIP_FAST, q_max)


def upper_bound_split(delta: RationalLike) -> int:
    """
    Certified upper bound on grid_count_full_set(δ) from a split at height h.

    With h = 1/ceil(δ^(-2/3)), points at height >= h each occupy at most one
    cell, and the ceil(h/δ) rows below h hold at most ceil(1/δ) cells each.
    """
    delta = _grid_mesh(delta)
    levels = ceil_rational_power(1 / delta, Fraction(2, 3))
    height = Fraction(1, levels)
    points_above = totient_sieve(levels).partial_sum(2, levels) if levels >= 2 else 0
    ncols = _cells_per_side(Fraction(1), delta)
    return points_above + ncols * math.ceil(height / delta)
