"""Frequency grid construction for period searches.

The search runs over angular frequencies omega = 2*pi / period. The grid
spacing scales inversely with the observation time span: peaks of the
profile objective have width of order 1/span, and a tenth of that keeps the
argmin within one step of the best off-grid frequency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniformly spaced angular frequencies, strictly increasing.

    omega_max is the requested upper edge; the last grid value is the first
    point at or above it, so the grid may overshoot by at most one step.
    """

    omegas: np.ndarray
    spacing: float
    omega_min: float
    omega_max: float

    def __post_init__(self):
        omegas = np.asarray(self.omegas, dtype=np.float64)
        if omegas.ndim != 1 or omegas.size == 0:
            raise ValidationError("grid must be a nonempty 1-d array")
        if omegas.size > 1 and not np.all(np.diff(omegas) > 0.0):
            raise ValidationError("grid frequencies must be strictly increasing")
        omegas = omegas.copy()
        omegas.setflags(write=False)
        object.__setattr__(self, "omegas", omegas)

    @property
    def n(self):
        return self.omegas.size

    @property
    def periods(self):
        return TWO_PI / self.omegas


def grid_from_bounds(omega_min, omega_max, spacing):
    """Uniform grid from omega_min up to the first value >= omega_max."""
    if not (np.isfinite(omega_min) and np.isfinite(omega_max) and np.isfinite(spacing)):
        raise ValidationError("grid bounds and spacing must be finite")
    if omega_min <= 0.0 or omega_max <= omega_min:
        raise ValidationError(
            f"need 0 < omega_min < omega_max (got {omega_min!r}, {omega_max!r})"
        )
    if spacing <= 0.0:
        raise ValidationError("spacing must be > 0")
    # first k with omega_min + k*spacing >= omega_max; the 1e-9 backoff keeps
    # an exact multiple from overshooting to one extra point in floating point
    k = int(np.ceil((omega_max - omega_min) / spacing - 1e-9))
    k = max(k, 1)
    omegas = omega_min + spacing * np.arange(k + 1, dtype=np.float64)
    if omegas[-1] < omega_max:  # backoff undershot a genuine fractional step
        omegas = np.append(omegas, omega_min + spacing * (k + 1))
    return FrequencyGrid(omegas, float(spacing), float(omega_min), float(omega_max))


def build_grid(period_min, period_max, t_min, t_max):
    """Grid covering [2*pi/period_max, 2*pi/period_min] for a time span.

    Spacing is 0.1 / (t_max - t_min) with the span taken over all bands
    jointly. A zero or negative span is rejected: a single-epoch data set
    carries no period information.
    """
    period_min = float(period_min)
    period_max = float(period_max)
    if not (np.isfinite(period_min) and np.isfinite(period_max)):
        raise ValidationError("period bounds must be finite")
    if period_min <= 0.0 or period_max <= period_min:
        raise ValidationError(
            f"need 0 < period_min < period_max (got {period_min!r}, {period_max!r})"
        )
    t_min = float(t_min)
    t_max = float(t_max)
    span = t_max - t_min
    if not np.isfinite(span) or span <= 0.0:
        raise ValidationError(f"degenerate time span {span!r}")
    return grid_from_bounds(TWO_PI / period_max, TWO_PI / period_min, 0.1 / span)
