"""
Utility functions for parsing exact inputs and writing reports and plots.
"""

import csv
import io
import json
import logging
import os
import shutil
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
from PIL import Image, UnidentifiedImageError  # noqa: E402

logger = logging.getLogger(__name__)

CSV_FIELDS = ('mesh_num', 'mesh_den', 'count', 'method', 'q_max')


class ReportWriteError(Exception):
    """Custom exception for report and plot writing errors."""
    pass


def parse_rational(text: str, name: str = 'value') -> Fraction:
    """
    Parse a command-line rational written as an integer or p/q.

    Args:
        text (str): Raw flag value
        name (str): Flag name used in error messages

    Returns:
        Fraction: The parsed value in lowest terms

    Raises:
        ValueError: If the text is empty, a decimal, or not a rational
    """
    if not text or not isinstance(text, str):
        raise ValueError(f"{name} must be a non-empty p/q string")

    cleaned = text.strip()
    if not cleaned:
        raise ValueError(f"{name} cannot be empty or just whitespace")
    if any(ch in cleaned for ch in '.eE'):
        raise ValueError(f"{name} must be written as p/q, decimals are not exact: {text!r}")
    try:
        return Fraction(cleaned)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"{name} must be written as p/q, got {text!r}")


def parse_rational_list(text: str, name: str = 'value') -> List[Fraction]:
    """Parse a comma-separated list of p/q rationals."""
    items = [item for item in text.split(',') if item.strip()]
    if not items:
        raise ValueError(f"{name} needs at least one rational")
    return [parse_rational(item, name) for item in items]


def check_disk_space(filepath: str, required_bytes: int = 1024 * 1024) -> bool:
    """
    Check if there's enough disk space available next to filepath.

    Args:
        filepath (str): Path where a report will be saved
        required_bytes (int): Required space in bytes (default: 1MB)

    Returns:
        bool: True if enough space is available
    """
    try:
        total, used, free = shutil.disk_usage(os.path.dirname(os.path.abspath(filepath)))
        return free > required_bytes
    except Exception as e:
        logger.warning(f"Failed to check disk space: {e}")
        return True


def validate_image(image: Image.Image) -> bool:
    """
    Validate that a rendered plot image is readable and not corrupted.

    Args:
        image (PIL.Image.Image): Image to validate

    Returns:
        bool: True if image is valid
    """
    try:
        image.verify()
        return True
    except Exception as e:
        logger.error(f"Image validation failed: {e}")
        return False


def create_backup(filepath: str) -> Optional[str]:
    """
    Copy an existing report to <filepath>.backup before it is overwritten.

    Returns:
        str: Path to the backup file, or None if nothing was backed up
    """
    if not os.path.exists(filepath):
        return None

    backup_path = f"{filepath}.backup"
    try:
        shutil.copy2(filepath, backup_path)
        return backup_path
    except Exception as e:
        logger.warning(f"Failed to create backup: {e}")
        return None


def _prepare_path(filepath: str) -> None:
    directory = os.path.dirname(os.path.abspath(filepath))
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as e:
        raise ReportWriteError(f"Cannot create output directory {directory}: {e}")
    if not check_disk_space(filepath):
        raise ReportWriteError("Insufficient disk space for writing the report")
    backup_path = create_backup(filepath)
    if backup_path:
        logger.info(f"Created backup at: {backup_path}")


def format_csv(rows: Iterable[dict], fieldnames: Sequence[str] = CSV_FIELDS) -> str:
    """Render rows as CSV text with a header and '\\n' line endings."""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(fieldnames), lineterminator='\n', extrasaction='ignore')
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


def _encode(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (tuple, set, frozenset)):
        return list(value)
    if hasattr(value, 'item'):
        return value.item()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def format_json(payload: dict) -> str:
    """Render a report as JSON with sorted keys; rationals become 'p/q' strings."""
    return json.dumps(payload, sort_keys=True, indent=2, default=_encode) + '\n'


def write_text_report(content: str, filepath: str) -> str:
    """
    Write a CSV or JSON report, backing up any previous file.

    Raises:
        ReportWriteError: If the file cannot be written
    """
    _prepare_path(filepath)
    try:
        with open(filepath, 'w', encoding='utf-8', newline='') as handle:
            handle.write(content)
    except (IOError, OSError) as e:
        raise ReportWriteError(f"Failed to write report: {str(e)}")
    logger.info(f"Successfully wrote report to: {filepath}")
    return filepath


def save_loglog_plot(filepath: str, x: Sequence[float], y: Sequence[float], slope: Optional[float] = None,
                     intercept: Optional[float] = None, title: str = '', xlabel: str = 'log(1/mesh)',
                     ylabel: str = 'log(count)') -> str:
    """
    Save a static log-log scatter plot with an optional fitted line.

    The format follows the file extension (.svg or .png). PNG output is
    reopened with Pillow and verified before the path is returned.

    Args:
        filepath (str): Destination path ending in .svg or .png
        x: Values already on the log scale
        y: Values already on the log scale
        slope (float, optional): Fitted slope to draw
        intercept (float, optional): Fitted intercept to draw

    Returns:
        str: Path to the saved plot

    Raises:
        ReportWriteError: If the plot cannot be written or fails validation
    """
    extension = os.path.splitext(filepath)[1].lower()
    if extension not in ('.svg', '.png'):
        raise ReportWriteError(f"Plots are written as .svg or .png, got {filepath}")
    _prepare_path(filepath)

    plt.rcParams['svg.hashsalt'] = 'popcorn-dimension'
    fig, ax = plt.subplots(figsize=(6, 4.5))
    try:
        ax.plot(x, y, 'o', color='tab:blue', label='exact counts')
        if slope is not None and intercept is not None and len(x) > 0:
            xs = [min(x), max(x)]
            ax.plot(xs, [intercept + slope * value for value in xs], '-', color='tab:red',
                    label=f'slope {slope:.4f}')
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.grid(True, alpha=0.3)
        ax.legend(loc='upper left')
        metadata = {'Date': None} if extension == '.svg' else {'Software': None}
        fig.savefig(filepath, format=extension[1:], metadata=metadata)
    except (IOError, OSError, ValueError) as e:
        raise ReportWriteError(f"Failed to save plot: {str(e)}")
    finally:
        plt.close(fig)

    if extension == '.png':
        try:
            with Image.open(filepath) as image:
                valid = validate_image(image)
        except UnidentifiedImageError:
            raise ReportWriteError("Saved plot is not a valid image")
        if not valid:
            raise ReportWriteError("Image validation failed")

    logger.info(f"Successfully saved plot to: {filepath}")
    return filepath
