"""Common numerical helpers"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from scipy.integrate import simpson

from pyiongate.exceptions import DomainException, GridResolutionException

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


def time_grid(
    duration: float,
    frequencies: Tuple[float, ...],
    rf_frequency: Optional[float] = None,
    samples_per_rf_period: int = 128,
    samples_per_secular_period: int = 256,
    segments: int = 1,
) -> np.ndarray:
    """Uniform quadrature grid on [0, duration]

    The number of intervals resolves the r.f. period and the fastest secular period, and is a multiple of
    ``4 * segments`` so every segment boundary falls on a grid point and every segment supports a Simpson halving
    check.

    Args:
        duration: gate time [s]
        frequencies: secular frequencies to resolve [rad/s]
        rf_frequency: r.f. drive frequency [rad/s], None for a static trap
        samples_per_rf_period: samples per r.f. period
        samples_per_secular_period: samples per period of the fastest frequency
        segments: number of equal-time pulse segments

    Returns:
        (np.ndarray): sample times
    """
    if not duration > 0:
        raise DomainException(f"Gate time must be positive, got {duration}")
    if segments < 1:
        raise DomainException(f"Segment count must be at least 1, got {segments}")
    intervals = 8
    if rf_frequency:
        intervals = max(intervals, math.ceil(duration * rf_frequency / TWO_PI * samples_per_rf_period))
    fastest = max((abs(f) for f in frequencies), default=0.0)
    if fastest:
        intervals = max(intervals, math.ceil(duration * fastest / TWO_PI * samples_per_secular_period))
    block = 4 * segments
    intervals = block * math.ceil(intervals / block)
    logger.debug("Time grid with %d intervals for %d segments", intervals, segments)
    return np.linspace(0.0, duration, intervals + 1)


def grid_step(t: np.ndarray) -> float:
    """Step of a uniform grid starting at zero"""
    if t.ndim != 1 or t.size < 3 or t[0] != 0.0:
        raise GridResolutionException("Quadrature grid must be one dimensional and start at t = 0")
    step = (t[-1] - t[0]) / (t.size - 1)
    if not np.allclose(np.diff(t), step, rtol=1e-9, atol=0.0):
        raise GridResolutionException("Quadrature grid must be uniform")
    return float(step)


def segment_slices(intervals: int, segments: int) -> List[slice]:
    """Slices of the grid samples belonging to each equal-time segment (boundaries are shared)"""
    if intervals % (4 * segments):
        raise GridResolutionException(
            f"{intervals} grid intervals do not split into {segments} segments of Simpson blocks"
        )
    width = intervals // segments
    return [slice(beta * width, (beta + 1) * width + 1) for beta in range(segments)]


def halving_change(y: np.ndarray, step: float, total: np.ndarray) -> float:
    """Relative change of a Simpson integral when every other sample is dropped

    The change is measured against the larger of the integral and the integral of the absolute value, so integrals
    that cancel to zero by construction do not report spurious relative changes.
    """
    coarse = simpson(y[..., ::2], dx=2.0 * step, axis=-1)
    scale = np.maximum(np.abs(total), simpson(np.abs(y), dx=step, axis=-1))
    with np.errstate(divide="ignore", invalid="ignore"):
        change = np.where(scale > 0, np.abs(total - coarse) / scale, 0.0)
    return float(np.max(change, initial=0.0))


def segment_integrals(y: np.ndarray, step: float, slices: List[slice]) -> Tuple[np.ndarray, float]:
    """Simpson integral of ``y`` over each segment

    Args:
        y: samples, time on the last axis
        step: grid step
        slices: segment slices from :func:`segment_slices`

    Returns:
        (np.ndarray, float): integrals with a trailing segment axis, largest halving change
    """
    totals = []
    change = 0.0
    for part in slices:
        chunk = y[..., part]
        total = simpson(chunk, dx=step, axis=-1)
        change = max(change, halving_change(chunk, step, total))
        totals.append(total)
    return np.stack(totals, axis=-1), change

