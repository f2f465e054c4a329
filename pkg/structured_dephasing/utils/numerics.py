"""
Small numerical helpers shared by the services.
"""

import math
from typing import Tuple

import numpy as np


def uniform_grid(center: float, half_width: float, spacing: float) -> np.ndarray:
    """
    Return a symmetric uniform grid around ``center``.

    The number of intervals is rounded up so that the actual spacing never
    exceeds the requested one.
    """
    if half_width <= 0 or spacing <= 0:
        raise ValueError("Grid half-width and spacing must be positive")
    n_points = int(math.ceil(2.0 * half_width / spacing)) + 1
    return np.linspace(center - half_width, center + half_width, n_points)


def parabolic_vertex(x: np.ndarray, y: np.ndarray, index: int) -> float:
    """
    Abscissa of the parabola through samples index-1, index, index+1.

    Assumes uniform spacing. Falls back to x[index] when the three samples
    are collinear or the vertex leaves the bracket.
    """
    y1, y2, y3 = y[index - 1], y[index], y[index + 1]
    curvature = y1 - 2.0 * y2 + y3
    if curvature == 0.0:
        return float(x[index])
    offset = 0.5 * (y1 - y3) / curvature
    if not -1.0 <= offset <= 1.0:
        return float(x[index])
    return float(x[index] + offset * (x[index + 1] - x[index]))


def round_significant(value: float, digits: int = 12) -> float:
    """Round to ``digits`` significant digits; non-finite values pass through."""
    if value == 0.0 or not math.isfinite(value):
        return value
    return float(format(value, f".{digits}g"))


def relative_change(new: np.ndarray, old: np.ndarray) -> float:
    """Largest elementwise relative change between two parameter vectors."""
    scale = np.maximum(np.abs(old), 1e-300)
    return float(np.max(np.abs(new - old) / scale))


def bracket(values: np.ndarray, index: int) -> Tuple[float, float]:
    """Neighbours of values[index], clamped at the array ends."""
    lo = values[max(index - 1, 0)]
    hi = values[min(index + 1, values.size - 1)]
    return float(lo), float(hi)
