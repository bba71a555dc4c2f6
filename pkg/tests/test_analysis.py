"""
Tests for exponent fitting, spectrum estimation and the certified checks.
"""

import logging
import math
from fractions import Fraction

import pytest

from popcorn_dimension.analysis import (
    InsufficientDataError,
    ScalingSample,
    aggregate_lower_bound,
    box_dimension_sweep,
    estimate_spectrum,
    fit_aggregate_lower_bound,
    fit_box_dimension,
    lower_bound_collapsed_strip,
    lower_bound_strip,
    strip_range,
    theoretical_spectrum,
    verify_chung_erdos_chain,
    verify_duffin_schaeffer,
    verify_horizontal_gap,
    verify_local_ds,
    verify_square_estimate,
    verify_strip_lemma,
    verify_totient,
    verify_upper_bound,
    window_mesh,
)
from popcorn_dimension.covering import (
    CostGuardError,
    ScaleOrderError,
    grid_count_points,
    grid_count_reciprocal_set,
    grid_count_strip,
)
from popcorn_dimension.intervals import build_E_n, measure
from popcorn_dimension.numtheory import RangeError
from popcorn_dimension.popcorn import DomainError, collapsed_strip_points, collapsed_strip_spec


def pow2(k):
    return Fraction(1, 2 ** k)


def test_fit_exact_power_law():
    """Test that counts mesh^(-3/2) give slope 3/2."""
    samples = [ScalingSample(pow2(k), 2 ** (3 * k // 2)) for k in (4, 6, 8, 10)]
    fit = fit_box_dimension(samples)
    assert fit.slope == pytest.approx(1.5, abs=1e-12)
    assert fit.stderr == pytest.approx(0.0, abs=1e-12)
    assert all(s == pytest.approx(1.5) for s in fit.pair_slopes)
    assert all(abs(r) < 1e-9 for r in fit.residuals)
    assert fit.criterion_ok


def test_fit_constant_counts():
    """Test that constant counts give slope 0."""
    fit = fit_box_dimension([ScalingSample(pow2(k), 7) for k in (2, 3, 4, 5)])
    assert fit.slope == pytest.approx(0.0, abs=1e-12)


def test_fit_errors():
    """Test the sample count and ordering checks."""
    with pytest.raises(InsufficientDataError):
        fit_box_dimension([ScalingSample(pow2(2), 4), ScalingSample(pow2(3), 8)])
    with pytest.raises(ValueError):
        fit_box_dimension([ScalingSample(pow2(k), 4) for k in (3, 2, 4)])
    with pytest.raises(RangeError):
        ScalingSample(pow2(2), 0)


def test_fit_sequence_criterion_warning(caplog):
    """Test that a large mesh jump is flagged but not fatal."""
    samples = [ScalingSample(pow2(k), 2 ** k) for k in (2, 3, 20)]
    with caplog.at_level(logging.WARNING):
        fit = fit_box_dimension(samples, mesh_ratio_floor=Fraction(1, 16))
    assert not fit.criterion_ok
    assert fit.slope == pytest.approx(1.0)
    assert 'sequence criterion' in caplog.text


def test_reciprocal_set_slope():
    """Test that the 1/n demo set has fitted dimension near 1/2."""
    samples = [ScalingSample.from_report(grid_count_reciprocal_set(pow2(k))) for k in range(8, 17)]
    fit = fit_box_dimension(samples)
    assert 0.45 <= fit.slope <= 0.55


def test_box_dimension_small_sweep():
    """Test a quick sweep: counts grow and the slope sits between 1 and 2."""
    reports = box_dimension_sweep([pow2(k) for k in range(4, 10)])
    counts = [report.count for report in reports]
    assert counts == sorted(counts)
    fit = fit_box_dimension([ScalingSample.from_report(report) for report in reports])
    assert 1.0 < fit.slope < 2.0


@pytest.mark.slow
def test_box_dimension_four_thirds():
    """Test the popcorn slope over δ = 2^-8..2^-16."""
    reports = box_dimension_sweep([pow2(k) for k in range(8, 17)])
    fit = fit_box_dimension([ScalingSample.from_report(report) for report in reports])
    assert 1.25 <= fit.slope <= 1.41


def test_theoretical_spectrum_values():
    """Test closed-form values and continuity at 2/3."""
    assert theoretical_spectrum(Fraction(1, 2)) == Fraction(5, 3)
    assert theoretical_spectrum(Fraction(3, 4)) == 2
    assert theoretical_spectrum(Fraction(2, 3)) == 2
    assert theoretical_spectrum(Fraction(2, 3) - Fraction(1, 10 ** 9)) == pytest.approx(2, abs=1e-7)
    assert float(theoretical_spectrum(Fraction(1, 10 ** 6))) == pytest.approx(4 / 3, abs=1e-5)
    with pytest.raises(DomainError):
        theoretical_spectrum(0)
    with pytest.raises(DomainError):
        theoretical_spectrum(1)


def test_theoretical_spectrum_monotone():
    """Test that the curve is nondecreasing on a dense grid."""
    values = [theoretical_spectrum(Fraction(k, 1000)) for k in range(1, 1000)]
    assert values == sorted(values)
    assert all(v == 2 for k, v in zip(range(1, 1000), values) if k >= 667)


def test_window_mesh():
    """Test exact and rounded window meshes."""
    assert window_mesh(Fraction(1, 2), 2) == Fraction(1, 36)
    assert window_mesh(Fraction(1, 3), 1) == Fraction(1, 8)
    assert window_mesh(Fraction(4, 5), 5) == Fraction(1, 60)
    assert window_mesh(Fraction(4, 5), 30) == Fraction(1, 930 * 6)
    with pytest.raises(ScaleOrderError):
        window_mesh(Fraction(999, 1000), 1)


@pytest.mark.parametrize('theta', [Fraction(3, 10), Fraction(2, 5), Fraction(7, 10), Fraction(4, 5)])
def test_window_mesh_tiles_window(theta):
    """Test that every window side holds a whole number of cells."""
    for n in range(3, 31):
        size = Fraction(1, n * (n + 1))
        cells = size / window_mesh(theta, n)
        assert cells.denominator == 1
        assert cells == round((n * (n + 1)) ** float(1 / theta - 1))


def test_estimate_spectrum_small():
    """Test a small estimate: ordered samples and a finite exponent."""
    point = estimate_spectrum(Fraction(1, 2), 2, 5)
    assert [sample.n for sample in point.samples] == [2, 3, 4, 5]
    assert point.samples[0].mesh == Fraction(1, 36)
    assert all(sample.count >= 1 for sample in point.samples)
    assert math.isfinite(point.fitted_s)
    assert point.theory == Fraction(5, 3)


def test_estimate_spectrum_errors():
    """Test the window count and cost checks."""
    with pytest.raises(InsufficientDataError):
        estimate_spectrum(Fraction(1, 2), 3, 3)
    with pytest.raises(CostGuardError) as exc_info:
        estimate_spectrum(Fraction(1, 2), 3, 12, cost_guard=100)
    assert exc_info.value.parameter == 'n'
    assert exc_info.value.value == 3


@pytest.mark.slow
@pytest.mark.parametrize('theta,n_lo,n_hi', [
    (Fraction(2, 5), 3, 12),
    (Fraction(1, 2), 3, 12),
    (Fraction(3, 10), 3, 6),
])
def test_spectrum_band_below_two_thirds(theta, n_lo, n_hi):
    """Test fitted exponents within 0.25 of the closed form."""
    point = estimate_spectrum(theta, n_lo, n_hi)
    assert abs(point.fitted_s - float(theoretical_spectrum(theta))) <= 0.25


def test_spectrum_theta_three_tenths_budget():
    """Test that n = 6 fits the default window budget and n = 7 does not."""
    with pytest.raises(CostGuardError) as exc_info:
        estimate_spectrum(Fraction(3, 10), 6, 7, cost_guard=10 ** 9)
    assert exc_info.value.value == 7


@pytest.mark.slow
@pytest.mark.parametrize('theta', [Fraction(7, 10), Fraction(4, 5)])
def test_spectrum_band_above_two_thirds(theta):
    """Test fitted exponents within 0.3 of 2."""
    point = estimate_spectrum(theta, 5, 30)
    assert abs(point.fitted_s - 2) <= 0.3


@pytest.mark.slow
def test_spectrum_trend_across_theta_grid():
    """Test that fitted exponents rise with θ and level off at 2."""
    grid = [
        (Fraction(3, 10), 3, 6),
        (Fraction(2, 5), 3, 12),
        (Fraction(1, 2), 3, 12),
        (Fraction(7, 10), 5, 30),
        (Fraction(4, 5), 5, 30),
    ]
    fits = [estimate_spectrum(theta, n_lo, n_hi).fitted_s for theta, n_lo, n_hi in grid]
    rising, plateau = fits[:3], fits[3:]
    assert rising == sorted(rising)
    assert min(plateau) > max(rising)
    # Both plateau values estimate the same exponent 2.
    assert abs(plateau[0] - plateau[1]) <= 0.1


def test_lower_bound_strip_examples():
    """Test the strip lower bound against exact counts."""
    assert lower_bound_strip(1, Fraction(1, 4)) == Fraction(121, 126)
    assert lower_bound_strip(1, Fraction(1, 4)) <= 3
    assert lower_bound_strip(2, Fraction(1, 64)) <= grid_count_strip(2, Fraction(1, 64)).count


def test_lower_bound_single_level():
    """Test that a one-level strip gives μ(E_q)/(4δ)."""
    delta = Fraction(1, 64)
    assert lower_bound_strip(8, delta) == measure(build_E_n(8, delta)) / (4 * delta)


def test_lower_bound_empty_strip(caplog):
    """Test that an empty strip gives zero with a warning."""
    with caplog.at_level(logging.WARNING):
        assert lower_bound_strip(5, Fraction(1, 12)) == 0
    assert 'no levels' in caplog.text


def test_lower_bound_collapsed_strip():
    """Test the collapsed bound against the distinct columns of its points."""
    delta = Fraction(1, 120)
    for k in (1, 2, 3):
        spec = collapsed_strip_spec(k, 2, delta)
        bound = lower_bound_collapsed_strip(k, 2, delta)
        points = collapsed_strip_points(spec)
        columns = len({point.x // delta for point in points})
        assert 0 < bound <= columns
        assert columns <= grid_count_points(points, delta)


def test_strip_range():
    """Test the exact k range [ceil(δ^(-1/3)), floor(δ^(-9/20))]."""
    ks = strip_range(Fraction(1, 1024), Fraction(1, 20))
    assert (ks.start, ks.stop - 1) == (11, 22)
    ks = strip_range(Fraction(1, 2 ** 14), Fraction(1, 20))
    assert (ks.start, ks.stop - 1) == (26, 78)


def test_aggregate_lower_bound_small():
    """Test that the aggregate is the sum of the strip bounds."""
    delta = Fraction(1, 1024)
    ks, total = aggregate_lower_bound(delta, Fraction(1, 20))
    assert total == sum(lower_bound_strip(k, delta) for k in ks)
    assert total > 0


@pytest.mark.slow
def test_aggregate_lower_bound_slope():
    """Test the aggregated lower bound slope over δ = 2^-10..2^-14."""
    fit = fit_aggregate_lower_bound([pow2(k) for k in range(10, 15)], Fraction(1, 20))
    assert fit.slope >= 1.25


def test_duffin_schaeffer_small():
    """Test the trivial disjoint case and a moderate exhaustive scan."""
    result = verify_duffin_schaeffer(3, Fraction(1, 1000))
    assert result.passed
    assert result.worst == 0
    assert result.checks == 1
    result = verify_duffin_schaeffer(50, Fraction(1, 10 ** 7))
    assert result.passed
    assert result.checks == 49 * 48 // 2
    with pytest.raises(RangeError):
        verify_duffin_schaeffer(2, Fraction(1, 1000))


@pytest.mark.parametrize('delta', [Fraction(1, 50), Fraction(1, 200)])
def test_duffin_schaeffer_with_overlaps(delta):
    """Test the overlap bound where the neighbourhoods E_n genuinely intersect."""
    result = verify_duffin_schaeffer(30, delta)
    assert 0 < result.worst <= 1
    assert result.passed
    assert result.checks == 29 * 28 // 2


def test_duffin_schaeffer_parallel_matches_sequential():
    """Test that the partitioned scan gives the same worst pair."""
    sequential = verify_duffin_schaeffer(25, Fraction(1, 100), workers=1)
    parallel = verify_duffin_schaeffer(25, Fraction(1, 100), workers=2)
    assert (sequential.worst, sequential.witness) == (parallel.worst, parallel.witness)


@pytest.mark.slow
def test_duffin_schaeffer_acceptance():
    """Test the exhaustive scan to n = 300 at δ = 10^-7."""
    assert verify_duffin_schaeffer(300, Fraction(1, 10 ** 7)).passed


def test_local_ds_small():
    """Test the trivial case and a scan with overlaps."""
    result = verify_local_ds(3, 2, Fraction(1, 1000))
    assert result.passed
    assert result.worst == 0
    result = verify_local_ds(20, 2, Fraction(1, 400))
    assert 0 < result.worst <= 1
    assert result.passed
    with pytest.raises(RangeError):
        verify_local_ds(2, 2, Fraction(1, 1000))


@pytest.mark.slow
def test_local_ds_acceptance():
    """Test the exhaustive scan to l = 200 with n = 100 at δ = 10^-8."""
    assert verify_local_ds(200, 100, Fraction(1, 10 ** 8)).passed


def test_strip_lemma():
    """Test exact strip-gap bounds where they hold and where they first fail."""
    assert verify_strip_lemma(Fraction(1, 10 ** 6), 99, Fraction(1, 20)).passed
    assert verify_strip_lemma(Fraction(1, 100), 3, Fraction(1, 20)).passed
    result = verify_strip_lemma(Fraction(1, 10 ** 6), 500, Fraction(1, 20))
    assert not result.passed
    assert 99 < result.witness <= 450
    with pytest.raises(RangeError):
        verify_strip_lemma(Fraction(1, 100), 50, Fraction(1, 20))


def test_totient_suite():
    """Test the totient growth and divisor-sum checks."""
    result = verify_totient(100, 10_000)
    assert result.passed
    assert result.witness == 210


def test_square_estimate_suite():
    """Test random square-estimate ratios stay in [1/3, 1]."""
    result = verify_square_estimate(10_000, seed=3)
    assert result.passed
    assert Fraction(1, 3) <= result.worst <= 1
    assert verify_square_estimate(50, seed=3).worst == verify_square_estimate(50, seed=3).worst


def test_horizontal_gap():
    """Test scaled gaps on S(l, n) are at least 1."""
    result = verify_horizontal_gap(60, 3)
    assert result.passed
    assert result.worst >= 1
    with pytest.raises(RangeError):
        verify_horizontal_gap(1, 3)


def test_upper_bound_suite():
    """Test the upper bound suite over a few meshes."""
    result = verify_upper_bound([Fraction(1, 16), Fraction(1, 64), Fraction(1, 256)])
    assert result.passed
    assert 0 < result.worst <= 1


def test_chung_erdos_chain():
    """Test the chain on the strip range at δ = 2^-10."""
    result = verify_chung_erdos_chain(pow2(10), Fraction(1, 20))
    assert result.passed
    assert result.checks == 12


@pytest.mark.slow
@pytest.mark.parametrize('k', [12, 14])
def test_chung_erdos_chain_fine(k):
    """Test the chain at finer meshes."""
    assert verify_chung_erdos_chain(pow2(k), Fraction(1, 20)).passed
