"""
Exponent estimation and certified inequality checks.

Box-dimension and spectrum exponents come from least-squares fits of exact
counts on log-log axes. The verify_* scans compare exact rationals against
explicit constants and return a VerificationResult with the worst case seen.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from popcorn_dimension.config import load_config
from popcorn_dimension.covering import (
    CostGuardError,
    CoverReport,
    Region,
    ScaleOrderError,
    grid_count_full_set,
    grid_count_strip,
    grid_count_window,
    upper_bound_split,
    window_cost,
)
from popcorn_dimension.intervals import build_E_n, build_F_l, chung_erdos_bound, intersection_measure
from popcorn_dimension.numtheory import (
    RangeError,
    RationalLike,
    ceil_rational_power,
    floor_rational_power,
    reduced_fraction,
    square_estimate_ratio,
    strip_index_L,
    totient_sieve,
    unit_mesh,
    verify_totient_bound,
)
from popcorn_dimension.popcorn import (
    CollapsedLine,
    DomainError,
    collapsed_line_points,
    collapsed_strip_spec,
    strip_spec,
)

logger = logging.getLogger(__name__)

TWO_THIRDS = Fraction(2, 3)
FOUR_THIRDS = Fraction(4, 3)


class InsufficientDataError(ValueError):
    """Raised when a fit has too few samples."""
    pass


@dataclass(frozen=True)
class ScalingSample:
    """One (mesh, count) pair of a box-counting sweep."""

    mesh: Fraction
    count: int

    def __post_init__(self):
        object.__setattr__(self, 'mesh', reduced_fraction(self.mesh))
        if self.mesh <= 0:
            raise RangeError(f"Mesh must be positive, got {self.mesh}")
        if self.count < 1:
            raise RangeError(f"Counts must be at least 1, got {self.count}")

    @classmethod
    def from_report(cls, report: CoverReport) -> 'ScalingSample':
        return cls(report.mesh, report.count)


@dataclass(frozen=True)
class BoxDimensionFit:
    """Least-squares slope of log(count) against log(1/mesh) with diagnostics."""

    slope: float
    stderr: float
    intercept: float
    residuals: Tuple[float, ...]
    pair_slopes: Tuple[float, ...]
    criterion_ok: bool = True


@dataclass(frozen=True)
class WindowSample:
    """Exact count in the window [1/(n+1), 1/n] x [0, R] at mesh r."""

    n: int
    size: Fraction
    mesh: Fraction
    count: int
    q_max: int


@dataclass(frozen=True)
class SpectrumPoint:
    """Window samples at one θ with the fitted exponent and its standard error."""

    theta: Fraction
    samples: Tuple[WindowSample, ...]
    fitted_s: float
    stderr: float

    @property
    def theory(self) -> Fraction:
        return theoretical_spectrum(self.theta)


@dataclass(frozen=True)
class VerificationResult:
    """
    Outcome of a certified scan.

    worst is the extreme value of the checked quantity (exact when the scan is
    exact), witness is where it occurs, or the first violation when passed is
    False.
    """

    suite: str
    passed: bool
    worst: object
    witness: object
    checks: int
    details: dict = field(default_factory=dict)


def _resolve(value, key: str):
    return load_config()[key] if value is None else value


def _log_ratio(value: Fraction) -> float:
    """Natural log of a positive rational without converting it to float first."""
    return math.log(value.numerator) - math.log(value.denominator)


def _least_squares(x: Sequence[float], y: Sequence[float]):
    fit = stats.linregress(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    residuals = y - (fit.intercept + fit.slope * x)
    pair_slopes = np.diff(y) / np.diff(x)
    stderr = 0.0 if len(x) < 3 else float(fit.stderr)
    return float(fit.slope), stderr, float(fit.intercept), tuple(residuals.tolist()), tuple(pair_slopes.tolist())


def fit_box_dimension(samples: Sequence[ScalingSample],
                      mesh_ratio_floor: Optional[Fraction] = None) -> BoxDimensionFit:
    """
    Fit the box-counting exponent from a sweep of exact counts.

    Args:
        samples: At least three samples with strictly decreasing meshes
        mesh_ratio_floor: Smallest allowed ratio between consecutive meshes;
            defaults to POPCORN_MESH_RATIO_FLOOR

    Returns:
        BoxDimensionFit: Slope, standard error, intercept and diagnostics

    Raises:
        InsufficientDataError: If fewer than three samples are given
        ValueError: If the meshes are not strictly decreasing
    """
    if len(samples) < 3:
        raise InsufficientDataError(f"Box-dimension fit needs at least 3 samples, got {len(samples)}")
    meshes = [sample.mesh for sample in samples]
    if any(later >= earlier for earlier, later in zip(meshes, meshes[1:])):
        raise ValueError(f"Sample meshes must be strictly decreasing, got {[str(m) for m in meshes]}")

    floor = reduced_fraction(_resolve(mesh_ratio_floor, 'mesh_ratio_floor'))
    criterion_ok = True
    for earlier, later in zip(meshes, meshes[1:]):
        if later / earlier < floor:
            logger.warning(
                f"Mesh ratio {later / earlier} between {earlier} and {later} is below {floor}; "
                f"the sequence criterion for box dimension does not apply"
            )
            criterion_ok = False

    x = [_log_ratio(1 / mesh) for mesh in meshes]
    y = [math.log(sample.count) for sample in samples]
    slope, stderr, intercept, residuals, pair_slopes = _least_squares(x, y)
    logger.info(f"Box-dimension fit over {len(samples)} meshes: slope {slope:.4f} ± {stderr:.4f}")
    return BoxDimensionFit(slope, stderr, intercept, residuals, pair_slopes, criterion_ok)


def box_dimension_sweep(deltas: Iterable[RationalLike], mode: str = 'full',
                        workers: Optional[int] = None) -> List[CoverReport]:
    """Full-set counts for each mesh, in the order given."""
    reports = []
    for delta in deltas:
        reports.append(grid_count_full_set(delta, mode=mode, workers=workers))
    return reports


def theoretical_spectrum(theta: RationalLike) -> Fraction:
    """
    Closed-form Assouad spectrum of the popcorn graph.

    Returns (4/3 - θ)/(1 - θ) below θ = 2/3 and 2 from there on.

    Raises:
        DomainError: If θ is not in (0, 1)
    """
    theta = reduced_fraction(theta)
    if not 0 < theta < 1:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")
    if theta < TWO_THIRDS:
        return (FOUR_THIRDS - theta) / (1 - theta)
    return Fraction(2)


def window_region(n: int) -> Region:
    """The window [1/(n+1), 1/n] x [0, 1/(n(n+1))] touching the base segment."""
    if n < 1:
        raise RangeError(f"Window index must be >= 1, got {n}")
    return Region.window(Fraction(1, n + 1), 0, Fraction(1, n * (n + 1)))


def window_mesh(theta: RationalLike, n: int) -> Fraction:
    """
    Mesh R^(1/θ) for the n-th window, kept rational.

    The mesh is R/m with m = (n(n+1))^(1/θ - 1) cells per window side,
    rounded to the nearest integer when 1/θ is not an integer, so the window
    is tiled by exactly m x m cells. When 1/θ is an integer the mesh is R^(1/θ).

    Raises:
        ScaleOrderError: If the resulting mesh is not below R
    """
    theta = reduced_fraction(theta)
    if not 0 < theta < 1:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")
    size = Fraction(1, n * (n + 1))
    exponent = 1 / theta - 1
    if exponent.denominator == 1:
        cells = (n * (n + 1)) ** exponent.numerator
    else:
        cells = round((n * (n + 1)) ** float(exponent))
    mesh = size / cells
    if mesh >= size:
        raise ScaleOrderError(f"Mesh {mesh} is not below the window size {size} (theta={theta}, n={n})")
    return mesh


def _count_window(task: Tuple[int, Fraction, int]) -> WindowSample:
    n, mesh, guard = task
    region = window_region(n)
    report = grid_count_window(region, mesh, cost_guard=guard)
    logger.info(f"Window n={n}: {report.count} cells at mesh 1/{mesh.denominator}")
    return WindowSample(n, region.size, mesh, report.count, report.q_max)


def estimate_spectrum(theta: RationalLike, n_lo: int, n_hi: int, workers: Optional[int] = None,
                      cost_guard: Optional[int] = None) -> SpectrumPoint:
    """
    Estimate the Assouad spectrum at θ from the windows n_lo <= n <= n_hi.

    Each window is counted exactly; fitted_s is the slope of log(count)
    against log(R_n/r_n), the number of cells per window side on a log scale.
    This equals (1/θ - 1)·log(1/R_n) when 1/θ is an integer. Samples are
    ordered by n before fitting, so the result does not depend on how the
    windows were scheduled.

    Args:
        theta: Rational in (0, 1)
        n_lo (int): First window index, at least 1
        n_hi (int): Last window index
        workers (int, optional): Worker processes; defaults to POPCORN_WORKERS
        cost_guard (int, optional): Per-window ceiling; defaults to POPCORN_SPECTRUM_GUARD

    Returns:
        SpectrumPoint: The samples and the fitted exponent

    Raises:
        InsufficientDataError: If the range holds fewer than two windows
        CostGuardError: If any window exceeds the ceiling, naming its n
    """
    theta = reduced_fraction(theta)
    if n_lo < 1 or n_hi - n_lo + 1 < 2:
        raise InsufficientDataError(f"Spectrum fit needs at least 2 windows, got n in [{n_lo}, {n_hi}]")
    guard = _resolve(cost_guard, 'spectrum_guard')
    workers = _resolve(workers, 'workers')

    tasks = []
    for n in range(n_lo, n_hi + 1):
        mesh = window_mesh(theta, n)
        cost = window_cost(window_region(n), mesh)
        if cost > guard:
            raise CostGuardError(
                f"Window n={n} at theta={theta} needs about {cost:,} visits, above the ceiling {guard:,}",
                parameter='n',
                value=n,
            )
        tasks.append((n, mesh, guard))

    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            samples = list(executor.map(_count_window, tasks))
    else:
        samples = [_count_window(task) for task in tasks]
    samples.sort(key=lambda sample: sample.size, reverse=True)

    x = [_log_ratio(sample.size / sample.mesh) for sample in samples]
    y = [math.log(sample.count) for sample in samples]
    slope, stderr, _, _, _ = _least_squares(x, y)
    logger.info(f"Spectrum at theta={theta}: fitted {slope:.4f}, closed form {float(theoretical_spectrum(theta)):.4f}")
    return SpectrumPoint(theta, tuple(samples), slope, stderr)


def lower_bound_strip(k: int, delta: RationalLike) -> Fraction:
    """
    Certified lower bound for the cover count of strip k.

    Applies the Chung-Erdős bound to the neighbourhoods E_q of the strip's
    levels and divides by 4δ. An empty strip gives 0 and logs a warning.
    """
    spec = strip_spec(k, delta)
    if spec.is_empty:
        logger.warning(f"Strip k={k} at delta={spec.delta} has no levels; lower bound is 0")
        return Fraction(0)
    events = [build_E_n(q, spec.delta) for q in spec.levels]
    return chung_erdos_bound(events) / (4 * spec.delta)


def lower_bound_collapsed_strip(k: int, n: int, delta: RationalLike) -> Fraction:
    """Chung-Erdős bound over the lines F_l of collapsed strip (k, n), divided by 4δ."""
    spec = collapsed_strip_spec(k, n, delta)
    if spec.is_empty:
        logger.warning(f"Collapsed strip k={k}, n={n} at delta={spec.delta} has no lines; lower bound is 0")
        return Fraction(0)
    events = [build_F_l(l, n, spec.delta) for l in spec.lines]
    return chung_erdos_bound(events) / (4 * spec.delta)


def strip_range(delta: RationalLike, epsilon: Optional[Fraction] = None) -> range:
    """Strip indices k with ceil(δ^(-1/3)) <= k <= floor(δ^(-1/2+ε))."""
    delta = unit_mesh(delta)
    epsilon = reduced_fraction(_resolve(epsilon, 'strip_epsilon'))
    k_lo = ceil_rational_power(delta, Fraction(-1, 3))
    k_hi = floor_rational_power(delta, Fraction(-1, 2) + epsilon)
    return range(max(k_lo, 1), k_hi + 1)


def aggregate_lower_bound(delta: RationalLike, epsilon: Optional[Fraction] = None) -> Tuple[range, Fraction]:
    """Sum of lower_bound_strip over the strip range; returns (k range, total)."""
    ks = strip_range(delta, epsilon)
    total = sum((lower_bound_strip(k, delta) for k in ks), Fraction(0))
    logger.info(f"Aggregated strip lower bound at delta={delta} over k in [{ks.start}, {ks.stop - 1}]: {float(total):.2f}")
    return ks, total


def fit_aggregate_lower_bound(deltas: Sequence[RationalLike],
                              epsilon: Optional[Fraction] = None) -> BoxDimensionFit:
    """Slope of log(aggregated lower bound) against log(1/δ)."""
    if len(deltas) < 2:
        raise InsufficientDataError(f"Aggregate fit needs at least 2 meshes, got {len(deltas)}")
    x, y = [], []
    for delta in deltas:
        delta = reduced_fraction(delta)
        _, total = aggregate_lower_bound(delta, epsilon)
        if total <= 0:
            raise InsufficientDataError(f"Aggregated lower bound at delta={delta} is zero")
        x.append(_log_ratio(1 / delta))
        y.append(_log_ratio(total))
    slope, stderr, intercept, residuals, pair_slopes = _least_squares(x, y)
    return BoxDimensionFit(slope, stderr, intercept, residuals, pair_slopes)


@lru_cache(maxsize=None)
def _event_E(n: int, delta: Fraction):
    return build_E_n(n, delta)


@lru_cache(maxsize=None)
def _event_F(l: int, n: int, delta: Fraction):
    return build_F_l(l, n, delta)


def _pair_scan(task):
    """Worst ratio over pairs (i, j), i in the chunk and i < j <= upper."""
    suite, chunk, upper, delta, n = task
    worst, witness, checks = Fraction(-1), None, 0
    for i in chunk:
        for j in range(i + 1, upper + 1):
            if suite == 'duffin_schaeffer':
                overlap = intersection_measure(_event_E(i, delta), _event_E(j, delta))
                scale = 4 * (i * delta) * (j * delta)
            else:
                overlap = intersection_measure(_event_F(i, n, delta), _event_F(j, n, delta))
                scale = 8 * i * j * delta * delta * (n + 1) ** 2
            ratio = overlap / scale
            checks += 1
            if ratio > worst or (ratio == worst and (i, j) < witness):
                worst, witness = ratio, (i, j)
    return worst, witness, checks


def _pairwise_worst(suite: str, upper: int, delta: Fraction, n: int, workers: int):
    indices = list(range(2, upper))
    chunks = max(1, min(len(indices), workers * 4))
    tasks = [(suite, indices[c::chunks], upper, delta, n) for c in range(chunks)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_pair_scan, tasks))
    else:
        results = [_pair_scan(task) for task in tasks]

    worst, witness, checks = Fraction(-1), None, 0
    for part_worst, part_witness, part_checks in results:
        checks += part_checks
        if part_witness is None:
            continue
        if part_worst > worst or (part_worst == worst and part_witness < witness):
            worst, witness = part_worst, part_witness
    return worst, witness, checks


def verify_duffin_schaeffer(n_max: int, delta: RationalLike, workers: Optional[int] = None) -> VerificationResult:
    """
    Worst μ(E_n ∩ E_m)/(4ψ(n)ψ(m)) over 2 <= n < m <= n_max with ψ(n) = nδ.

    The scan is exact and passes when the worst ratio is at most 1.

    Raises:
        RangeError: If n_max < 3 or delta is not in (0, 1)
    """
    if n_max < 3:
        raise RangeError(f"Duffin-Schaeffer scan needs n_max >= 3, got {n_max}")
    delta = unit_mesh(delta)
    worst, witness, checks = _pairwise_worst('duffin_schaeffer', n_max, delta, 0, _resolve(workers, 'workers'))
    passed = worst <= 1
    logger.info(f"Duffin-Schaeffer scan n<={n_max}, delta={delta}: worst ratio {worst} at {witness}")
    return VerificationResult('duffin_schaeffer', passed, worst, witness, checks)


def verify_local_ds(l_max: int, n: int, delta: RationalLike, workers: Optional[int] = None) -> VerificationResult:
    """
    Worst μ(F_l ∩ F_l')/(8·l·l'·δ²·(n+1)²) over 2 <= l < l' <= l_max.

    Raises:
        RangeError: If l_max < 3, n < 1 or delta is not in (0, 1)
    """
    if l_max < 3:
        raise RangeError(f"Local Duffin-Schaeffer scan needs l_max >= 3, got {l_max}")
    if n < 1:
        raise RangeError(f"Column index n must be >= 1, got {n}")
    delta = unit_mesh(delta)
    worst, witness, checks = _pairwise_worst('local_ds', l_max, delta, n, _resolve(workers, 'workers'))
    passed = worst <= 1
    logger.info(f"Local Duffin-Schaeffer scan l<={l_max}, n={n}, delta={delta}: worst ratio {worst} at {witness}")
    return VerificationResult('local_ds', passed, worst, witness, checks)


def verify_strip_lemma(delta: RationalLike, k_max: int, epsilon: Optional[Fraction] = None) -> VerificationResult:
    """
    Check 1/(2k²δ) <= L_δ(k) - L_δ(k+1) <= 1/(k²δ) exactly for 1 <= k <= k_max.

    worst is the largest normalized gap k²δ·(L_δ(k) - L_δ(k+1)); the witness
    is the first violating k, or the k attaining worst when every check passes.

    Raises:
        RangeError: If k_max exceeds floor(δ^(-1/2+ε))
    """
    delta = unit_mesh(delta)
    epsilon = reduced_fraction(_resolve(epsilon, 'strip_epsilon'))
    limit = floor_rational_power(delta, Fraction(-1, 2) + epsilon)
    if not 1 <= k_max <= limit:
        raise RangeError(f"k_max must lie in [1, {limit}] at delta={delta}, got {k_max}")

    worst, worst_k, violation = Fraction(0), None, None
    for k in range(1, k_max + 1):
        gap = strip_index_L(k, delta) - strip_index_L(k + 1, delta)
        normalized = k * k * delta * gap
        if normalized > worst:
            worst, worst_k = normalized, k
        if violation is None and not Fraction(1, 2) <= normalized <= 1:
            violation = (k, gap)
            logger.warning(f"Strip lemma fails at k={k}, delta={delta}: gap {gap}, bounds "
                           f"[{float(1 / (2 * k * k * delta)):.3f}, {float(1 / (k * k * delta)):.3f}]")
    passed = violation is None
    witness = worst_k if passed else violation[0]
    details = {} if passed else {'gap': violation[1]}
    return VerificationResult('strip_lemma', passed, worst, witness, k_max, details)


def verify_totient(lo: int, hi: int) -> VerificationResult:
    """
    Totient growth and divisor-sum checks on [lo, hi].

    Checks φ(n) > n/(e^γ·log log n + 3/log log n) for lo <= n <= hi and
    Σ_{d|n} φ(d) = n for n <= hi. worst is the minimum of φ(n)·log log n/n.
    """
    table = totient_sieve(hi)
    worst, argmin = verify_totient_bound(lo, hi, table)

    n = np.arange(lo, hi + 1, dtype=np.int64)
    loglog = np.log(np.log(n))
    floor_values = n / (np.exp(np.euler_gamma) * loglog + 3 / loglog)
    growth_ok = bool(np.all(table.values[lo:hi + 1] > floor_values))

    divisor_sums = np.zeros(hi + 1, dtype=np.int64)
    for d in range(1, hi + 1):
        divisor_sums[d::d] += table.values[d]
    identity_ok = bool(np.array_equal(divisor_sums[1:], np.arange(1, hi + 1)))

    passed = growth_ok and identity_ok
    logger.info(f"Totient checks on [{lo}, {hi}]: min ratio {worst:.4f} at n={argmin}, passed={passed}")
    return VerificationResult('totient', passed, worst, argmin, (hi - lo + 1) + hi)


def verify_square_estimate(trials: int = 10_000, seed: int = 0) -> VerificationResult:
    """Random pairs a > b > 1 with a - b >= 3; the exact ratio must lie in [1/3, 1]."""
    rng = np.random.default_rng(seed)
    worst, witness, violation = None, None, None
    for _ in range(trials):
        b = 1 + Fraction(int(rng.integers(1, 10_000)), int(rng.integers(1, 1_000)))
        a = b + 3 + Fraction(int(rng.integers(0, 10_000)), int(rng.integers(1, 1_000)))
        ratio = square_estimate_ratio(a, b)
        if worst is None or ratio < worst:
            worst, witness = ratio, (a, b)
        if violation is None and not Fraction(1, 3) <= ratio <= 1:
            violation = (a, b)
    passed = violation is None
    return VerificationResult('square_estimate', passed, worst, witness if passed else violation, trials)


def verify_horizontal_gap(l_max: int, n: int) -> VerificationResult:
    """
    Consecutive x gaps on the lines S(l, n), scaled by l·(n+1)², must be >= 1.

    Lines with a single point have no gaps and are skipped.
    """
    if l_max < 2 or n < 1:
        raise RangeError(f"Horizontal gap scan needs l_max >= 2 and n >= 1, got l_max={l_max}, n={n}")
    worst, witness, checks = None, None, 0
    for l in range(2, l_max + 1):
        xs = [point.x for point in collapsed_line_points(CollapsedLine(l, n))]
        for left, right in zip(xs, xs[1:]):
            scaled = (left - right) * l * (n + 1) ** 2
            checks += 1
            if worst is None or scaled < worst:
                worst, witness = scaled, (l, right, left)
    passed = worst is None or worst >= 1
    return VerificationResult('horizontal_gap', passed, worst, witness, checks)


def verify_upper_bound(deltas: Sequence[RationalLike], workers: Optional[int] = None) -> VerificationResult:
    """grid_count_full_set(δ) <= upper_bound_split(δ) at every mesh; worst is the largest ratio."""
    worst, witness, violation = Fraction(0), None, None
    for delta in deltas:
        report = grid_count_full_set(delta, workers=workers)
        bound = upper_bound_split(report.mesh)
        ratio = Fraction(report.count, bound)
        if ratio > worst:
            worst, witness = ratio, report.mesh
        if violation is None and report.count > bound:
            violation = report.mesh
    passed = violation is None
    return VerificationResult('upper_bound', passed, worst, witness if passed else violation, len(deltas))


def verify_chung_erdos_chain(delta: RationalLike, epsilon: Optional[Fraction] = None) -> VerificationResult:
    """lower_bound_strip(k, δ) <= grid_count_strip(k, δ) for every k in the strip range."""
    delta = unit_mesh(delta)
    worst, witness, violation, checks = Fraction(0), None, None, 0
    for k in strip_range(delta, epsilon):
        bound = lower_bound_strip(k, delta)
        count = grid_count_strip(k, delta, workers=1).count
        checks += 1
        if count == 0:
            if bound > 0 and violation is None:
                violation = k
            continue
        ratio = bound / count
        if ratio > worst:
            worst, witness = ratio, k
        if violation is None and ratio > 1:
            violation = k
    passed = violation is None
    logger.info(f"Chung-Erdős chain at delta={delta}: {checks} strips, worst ratio {float(worst):.4f}")
    return VerificationResult('chung_erdos_chain', passed, worst, witness if passed else violation, checks)
