"""
Configuration module for the popcorn dimension toolkit.
Handles loading and validation of environment variables.
"""

import os
from fractions import Fraction

from dotenv import load_dotenv


def _positive_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = int(raw.strip().replace('_', ''))
    except ValueError:
        raise ValueError(f'{name} must be a positive integer, got {raw!r}')
    if value < 1:
        raise ValueError(f'{name} must be a positive integer, got {raw!r}')
    return value


def _unit_fraction(name: str, default: Fraction) -> Fraction:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    text = raw.strip()
    if '/' not in text and not text.isdigit():
        raise ValueError(f'{name} must be a rational written as p/q, got {raw!r}')
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f'{name} must be a rational written as p/q, got {raw!r}')
    if not 0 < value < 1:
        raise ValueError(f'{name} must lie strictly between 0 and 1, got {raw!r}')
    return value


def load_config():
    """
    Load and validate environment variables used by the toolkit.

    Every setting is optional; command-line flags and explicit keyword
    arguments take precedence over the values returned here.

    Returns:
        dict: Configuration dictionary containing validated settings

    Raises:
        ValueError: If an environment variable is set to a malformed value
    """
    # Load environment variables from .env file
    load_dotenv()

    output_dir = os.getenv('POPCORN_OUTPUT_DIR', 'reports')

    return {
        'output_dir': output_dir,
        'workers': _positive_int('POPCORN_WORKERS', os.cpu_count() or 1),
        'count_guard': _positive_int('POPCORN_COUNT_GUARD', 2_000_000_000),
        'spectrum_guard': _positive_int('POPCORN_SPECTRUM_GUARD', 1_000_000_000),
        'oracle_guard': _positive_int('POPCORN_ORACLE_GUARD', 10_000_000),
        'totient_cap': _positive_int('POPCORN_TOTIENT_CAP', 100_000_000),
        'strip_epsilon': _unit_fraction('POPCORN_STRIP_EPSILON', Fraction(1, 20)),
        'mesh_ratio_floor': _unit_fraction('POPCORN_MESH_RATIO_FLOOR', Fraction(1, 16)),
    }
