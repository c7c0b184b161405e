"""
Core utilities.

Shared helpers for deterministic file output: float formatting, CSV and
PGM writers, and human-readable sizes/durations for log lines.

Usage:
    from apps.core.utils import write_csv, write_pgm, format_float
"""

import csv
import logging
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def format_float(value: float) -> str:
    """
    Format a float so that parsing it back gives the same value.

    Args:
        value: Float to format

    Returns:
        Shortest round-trip representation (e.g., '0.1', '1e-05')
    """
    return repr(float(value))


def format_cell(value) -> str:
    """Format one CSV cell; floats use the round-trip representation."""
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ''
    return str(value)


def ensure_parent(path) -> Path:
    """Create the parent directory of `path` if needed and return it as a Path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> int:
    """
    Write rows to a CSV file with a fixed header.

    Line endings are '\\n' on every platform so reruns are byte-identical.

    Args:
        path: Destination file
        header: Column names
        rows: Iterable of row sequences (same length as header)

    Returns:
        Number of data rows written
    """
    path = ensure_parent(path)
    count = 0
    with path.open('w', encoding='utf-8', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(cell) for cell in row])
            count += 1
    logger.debug('Wrote CSV', extra={'path': str(path), 'rows': count})
    return count


def normalize_to_bytes(values: np.ndarray) -> np.ndarray:
    """
    Min-max normalize an array to 0..255 unsigned bytes.

    A constant array maps to all zeros.
    """
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    if hi - lo <= 0.0:
        return np.zeros(values.shape, dtype=np.uint8)
    scaled = (values - lo) / (hi - lo) * 255.0
    return np.rint(scaled).astype(np.uint8)


def write_pgm(path, image: np.ndarray) -> None:
    """
    Write a 2-D array as a binary (P5) 8-bit PGM image.

    Args:
        path: Destination file
        image: 2-D array; non-uint8 input is min-max normalized first
    """
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError(f'PGM images must be 2-D, got shape {image.shape}')
    if image.dtype != np.uint8:
        image = normalize_to_bytes(image)
    rows, cols = image.shape
    path = ensure_parent(path)
    with path.open('wb') as handle:
        handle.write(f'P5\n{cols} {rows}\n255\n'.encode('ascii'))
        handle.write(np.ascontiguousarray(image).tobytes())


def format_bytes(bytes_value: int) -> str:
    """
    Format bytes into human-readable format (KB, MB, GB, etc.).

    Args:
        bytes_value: Number of bytes

    Returns:
        Formatted string (e.g., '1.5 MB')
    """
    for unit in ['B', 'KB', 'MB', 'GB', 'TB']:
        if bytes_value < 1024:
            return f'{bytes_value:.1f} {unit}'
        bytes_value /= 1024
    return f'{bytes_value:.1f} PB'


def format_duration(seconds: float) -> str:
    """
    Format seconds into a short human-readable duration.

    Args:
        seconds: Elapsed seconds

    Returns:
        Formatted string (e.g., '1m 30.0s', '0.012s')
    """
    if seconds < 60:
        return f'{seconds:.3f}s'
    minutes, rest = divmod(seconds, 60)
    if minutes < 60:
        return f'{int(minutes)}m {rest:.1f}s'
    hours, minutes = divmod(minutes, 60)
    return f'{int(hours)}h {int(minutes)}m'
