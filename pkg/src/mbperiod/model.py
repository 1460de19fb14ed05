"""Core data containers and objective functions.

A light curve is a collection of per-band magnitude series. The model for
band b is

    mag(t) = beta0_b + amp_b * sin(omega * t + rho_b)

with a single frequency omega shared across bands. The data objective is a
weighted least-squares negative log likelihood; two optional quadratic
penalties couple the per-band amplitudes and phases.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ValidationError

TWO_PI = 2.0 * np.pi


def _readonly_f64(values, name):
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional")
    arr.setflags(write=False)
    return arr


def wrap_phase(rho):
    """Wrap phases (scalar or array) into [-pi, pi)."""
    rho = np.asarray(rho, dtype=np.float64)
    wrapped = np.mod(rho + np.pi, TWO_PI) - np.pi
    # mod can land exactly on pi when its argument is a hair below 2*pi
    wrapped = np.where(wrapped >= np.pi, -np.pi, wrapped)
    if wrapped.ndim == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class BandSeries:
    """Observations for one band: times, magnitudes, and 1-sigma errors.

    All three arrays must have equal length and finite entries; sigma must
    be strictly positive. Empty bands are allowed.
    """

    label: str
    time: np.ndarray
    mag: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        time = _readonly_f64(self.time, "time")
        mag = _readonly_f64(self.mag, "mag")
        sigma = _readonly_f64(self.sigma, "sigma")
        if not (time.size == mag.size == sigma.size):
            raise ValidationError(
                f"band {self.label!r}: time/mag/sigma lengths differ "
                f"({time.size}/{mag.size}/{sigma.size})"
            )
        for name, arr in (("time", time), ("mag", mag), ("sigma", sigma)):
            if arr.size and not np.all(np.isfinite(arr)):
                raise ValidationError(f"band {self.label!r}: non-finite {name}")
        if sigma.size and not np.all(sigma > 0.0):
            raise ValidationError(f"band {self.label!r}: sigma must be > 0")
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "mag", mag)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n(self):
        return self.time.size

    @cached_property
    def weights(self):
        w = np.asarray(self.sigma, dtype=np.float64) ** -2
        w.setflags(write=False)
        return w


@dataclass(frozen=True)
class MultibandLightCurve:
    """One star's observations across bands, in a fixed band order."""

    star_id: str
    bands: tuple[BandSeries, ...]

    def __post_init__(self):
        bands = tuple(self.bands)
        if not bands:
            raise ValidationError(f"star {self.star_id!r}: no bands")
        labels = [b.label for b in bands]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"star {self.star_id!r}: duplicate band labels")
        object.__setattr__(self, "bands", bands)

    @property
    def n_bands(self):
        return len(self.bands)

    @property
    def labels(self):
        return tuple(b.label for b in self.bands)

    @property
    def n_obs(self):
        return sum(b.n for b in self.bands)

    def band(self, label):
        for b in self.bands:
            if b.label == label:
                return b
        raise KeyError(label)

    @cached_property
    def packed(self):
        """Concatenated (time, mag, weight, offsets) arrays for the kernels.

        offsets has length n_bands + 1; band b occupies the half-open slice
        [offsets[b], offsets[b + 1]).
        """
        t = np.concatenate([b.time for b in self.bands]) if self.n_obs else np.empty(0)
        m = np.concatenate([b.mag for b in self.bands]) if self.n_obs else np.empty(0)
        w = np.concatenate([b.weights for b in self.bands]) if self.n_obs else np.empty(0)
        offsets = np.zeros(self.n_bands + 1, dtype=np.int64)
        np.cumsum([b.n for b in self.bands], out=offsets[1:])
        for arr in (t, m, w):
            arr.setflags(write=False)
        offsets.setflags(write=False)
        return t, m, w, offsets

    def time_span(self):
        """(t_min, t_max) over all bands jointly."""
        if self.n_obs == 0:
            raise ValidationError(f"star {self.star_id!r}: no observations")
        t = self.packed[0]
        return float(t.min()), float(t.max())


@dataclass(frozen=True)
class ModelParams:
    """Per-band sinusoid parameters at a single shared frequency.

    beta0, amp, and rho are vectors of equal length (one entry per band).
    Canonical form has amp >= 0 and rho in [-pi, pi); see canonicalize().
    """

    omega: float
    beta0: np.ndarray
    amp: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        omega = float(self.omega)
        if not np.isfinite(omega) or omega <= 0.0:
            raise ValidationError("omega must be finite and > 0")
        beta0 = _readonly_f64(self.beta0, "beta0")
        amp = _readonly_f64(self.amp, "amp")
        rho = _readonly_f64(self.rho, "rho")
        if not (beta0.size == amp.size == rho.size):
            raise ValidationError("beta0/amp/rho lengths differ")
        if beta0.size == 0:
            raise ValidationError("params must cover at least one band")
        for name, arr in (("beta0", beta0), ("amp", amp), ("rho", rho)):
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"non-finite {name}")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "beta0", beta0)
        object.__setattr__(self, "amp", amp)
        object.__setattr__(self, "rho", rho)

    @property
    def n_bands(self):
        return self.beta0.size

    @property
    def period(self):
        return TWO_PI / self.omega


def canonicalize(params):
    """Map params onto the canonical parameterization.

    A band with negative amplitude describes the same curve as one with
    |amp| and a phase shifted by pi, so negative amplitudes are flipped
    first and all phases are wrapped into [-pi, pi) afterwards. The data
    term of the objective is unchanged; the phase penalty may change
    because wrapping moves phases by multiples of 2*pi.
    """
    amp = np.array(params.amp, copy=True)
    rho = np.array(params.rho, copy=True)
    neg = amp < 0.0
    amp[neg] = -amp[neg]
    rho[neg] += np.pi
    rho = wrap_phase(rho)
    return ModelParams(params.omega, params.beta0, amp, rho)


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty strengths and the unit reference direction for amplitudes.

    gamma1 scales the amplitude penalty (distance from the ray spanned by
    a_tilde); gamma2 scales the phase penalty (scatter around the mean
    phase). a_tilde must be unit-norm and entrywise nonnegative.
    """

    gamma1: float
    gamma2: float
    a_tilde: np.ndarray

    def __post_init__(self):
        gamma1 = float(self.gamma1)
        gamma2 = float(self.gamma2)
        if not np.isfinite(gamma1) or gamma1 < 0.0:
            raise ValidationError("gamma1 must be finite and >= 0")
        if not np.isfinite(gamma2) or gamma2 < 0.0:
            raise ValidationError("gamma2 must be finite and >= 0")
        a_tilde = _readonly_f64(self.a_tilde, "a_tilde")
        if a_tilde.size == 0:
            raise ValidationError("a_tilde must be nonempty")
        if not np.all(np.isfinite(a_tilde)):
            raise ValidationError("non-finite a_tilde")
        if np.any(a_tilde < 0.0):
            raise ValidationError("a_tilde entries must be >= 0")
        norm = float(np.linalg.norm(a_tilde))
        if abs(norm - 1.0) > 1e-12:
            raise ValidationError(f"a_tilde must be unit-norm (got {norm!r})")
        object.__setattr__(self, "gamma1", gamma1)
        object.__setattr__(self, "gamma2", gamma2)
        object.__setattr__(self, "a_tilde", a_tilde)

    @property
    def n_bands(self):
        return self.a_tilde.size

    @classmethod
    def uniform(cls, n_bands, gamma1=0.0, gamma2=0.0):
        """Config with the uniform reference direction 1/sqrt(B)."""
        if n_bands < 1:
            raise ValidationError("n_bands must be >= 1")
        return cls(gamma1, gamma2, np.full(n_bands, 1.0 / np.sqrt(n_bands)))


# ---------------------------------------------------------------------------
# objective pieces
# ---------------------------------------------------------------------------

def predict(params, band, t):
    """Model magnitudes for one band at times t."""
    if not 0 <= band < params.n_bands:
        raise IndexError(f"band index {band} out of range")
    t = np.asarray(t, dtype=np.float64)
    return params.beta0[band] + params.amp[band] * np.sin(
        params.omega * t + params.rho[band]
    )


def nll(lc, params):
    """Weighted least-squares data objective.

    One half of the weighted residual sum of squares, summed over bands.
    Empty bands contribute nothing.
    """
    if params.n_bands != lc.n_bands:
        raise ValidationError(
            f"params cover {params.n_bands} bands, light curve has {lc.n_bands}"
        )
    total = 0.0
    for b, series in enumerate(lc.bands):
        if series.n == 0:
            continue
        r = series.mag - predict(params, b, series.time)
        total += 0.5 * float(np.dot(series.weights * r, r))
    return total

def penalty_j1(amp, a_tilde):
    """Half squared distance of amp from its projection onto a_tilde."""
    amp = np.asarray(amp, dtype=np.float64)
    a_tilde = np.asarray(a_tilde, dtype=np.float64)
    if amp.shape != a_tilde.shape:
        raise ValidationError("amp and a_tilde lengths differ")
    dev = amp - np.dot(a_tilde, amp) * a_tilde
    return 0.5 * float(np.dot(dev, dev))


def penalty_j2(rho):
    """Half squared scatter of the phases around their mean."""
    rho = np.asarray(rho, dtype=np.float64)
    dev = rho - rho.mean()
    return 0.5 * float(np.dot(dev, dev))


def pnll(lc, params, cfg):
    """Penalized objective: nll + gamma1 * J1(amp) + gamma2 * J2(rho)."""
    if cfg.n_bands != lc.n_bands:
        raise ValidationError(
            f"penalty covers {cfg.n_bands} bands, light curve has {lc.n_bands}"
        )
    value = nll(lc, params)
    if cfg.gamma1 > 0.0:
        value += cfg.gamma1 * penalty_j1(params.amp, cfg.a_tilde)
    if cfg.gamma2 > 0.0:
        value += cfg.gamma2 * penalty_j2(params.rho)
    return value
