"""Popcorn dimension package initialization."""

__version__ = '0.1.0'

from popcorn_dimension.analysis import (  # noqa: E402
    BoxDimensionFit,
    InsufficientDataError,
    ScalingSample,
    SpectrumPoint,
    VerificationResult,
    estimate_spectrum,
    fit_box_dimension,
    lower_bound_strip,
    theoretical_spectrum,
    verify_duffin_schaeffer,
    verify_local_ds,
    verify_strip_lemma,
)
from popcorn_dimension.covering import (  # noqa: E402
    CostGuardError,
    CoverReport,
    MeshError,
    Region,
    brute_force_count,
    grid_count_full_set,
    grid_count_strip,
    grid_count_window,
    separated_count,
)
from popcorn_dimension.popcorn import PopcornPoint, enumerate_graph_points, popcorn_value  # noqa: E402

__all__ = [
    'BoxDimensionFit',
    'CostGuardError',
    'CoverReport',
    'InsufficientDataError',
    'MeshError',
    'PopcornPoint',
    'Region',
    'ScalingSample',
    'SpectrumPoint',
    'VerificationResult',
    'brute_force_count',
    'enumerate_graph_points',
    'estimate_spectrum',
    'fit_box_dimension',
    'grid_count_full_set',
    'grid_count_strip',
    'grid_count_window',
    'lower_bound_strip',
    'popcorn_value',
    'separated_count',
    'theoretical_spectrum',
    'verify_duffin_schaeffer',
    'verify_local_ds',
    'verify_strip_lemma',
]
