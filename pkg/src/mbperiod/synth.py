"""Synthetic multiband light curves for benchmarks and tests.

Each star gets a period drawn uniformly, an amplitude vector made of a
random overall scale times a shared mean direction plus Gaussian scatter
orthogonal to that direction, and per-band phases equal to a common phase
plus jitter. Magnitudes are the model values plus Gaussian noise with
per-point sigmas recorded in the output.

Every star draws from its own generator spawned off the top-level seed, so
results do not depend on generation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from zlib import crc32

import numpy as np

from .errors import ValidationError
from .model import BandSeries, ModelParams, MultibandLightCurve, predict, wrap_phase

# g/r/i/z/y-like decline toward redder bands, rescaled by amp_mean_scale
_DEFAULT_AMP_SHAPE = (1.0, 0.9, 0.75, 0.6, 0.5)


@dataclass(frozen=True)
class SimConfig:
    """Knobs for the generator; defaults give a 5-band short-period setup.

    amp_mean is the per-band mean amplitude vector (length n_bands); None
    selects a built-in declining shape scaled by amp_mean_scale. Each
    star's amplitude is c * amp_mean with c uniform on amp_scale_range,
    plus orthogonal Gaussian scatter with standard deviation
    amp_scatter_frac times the mean of its scaled amplitude vector,
    truncated at zero. Phases are a common uniform draw on phase_range
    plus per-band Gaussian jitter. noise_scale = 0 produces exact model
    magnitudes with unit sigmas recorded.
    """

    n_curves: int = 500
    n_bands: int = 5
    period_range: tuple = (0.2, 1.0)
    obs_per_band: int = 30
    # at 0.2 the 10-obs-per-band downsampled regime is genuinely hard
    # (unpenalized recovery well below ceiling) without being hopeless
    noise_scale: float = 0.2
    amp_mean: tuple | None = None
    amp_mean_scale: float = 0.4
    amp_scatter_frac: float = 0.1
    amp_scale_range: tuple = (0.6, 1.4)
    phase_range: tuple = (-np.pi, np.pi)
    phase_jitter: float = 0.1
    beta0_range: tuple = (15.0, 19.0)
    time_span: float = 1000.0
    seed: int = 0

    def __post_init__(self):
        if self.n_curves < 1 or self.n_bands < 1 or self.obs_per_band < 1:
            raise ValidationError("n_curves, n_bands, obs_per_band must be >= 1")
        lo, hi = self.period_range
        if not (0.0 < lo < hi):
            raise ValidationError("period_range must satisfy 0 < lo < hi")
        if self.noise_scale < 0.0:
            raise ValidationError("noise_scale must be >= 0")
        if self.time_span <= 0.0:
            raise ValidationError("time_span must be > 0")
        if self.amp_mean is not None and len(self.amp_mean) != self.n_bands:
            raise ValidationError("amp_mean length must equal n_bands")
        if self.seed < 0:
            raise ValidationError("seed must be >= 0")

    def mean_amp_vector(self):
        if self.amp_mean is not None:
            return np.asarray(self.amp_mean, dtype=np.float64)
        shape = np.array(
            [_DEFAULT_AMP_SHAPE[b % len(_DEFAULT_AMP_SHAPE)] for b in range(self.n_bands)]
        )
        return self.amp_mean_scale * shape


@dataclass(frozen=True)
class TruthRecord:
    star_id: str
    period: float
    params: ModelParams


_BAND_NAMES = "grizyuvwxn"


def _band_label(b):
    if b < len(_BAND_NAMES):
        return _BAND_NAMES[b]
    return f"b{b}"


def _simulate_one(star_id, cfg, rng):
    B = cfg.n_bands
    period = rng.uniform(*cfg.period_range)
    omega = 2.0 * np.pi / period
    abar = cfg.mean_amp_vector()
    c = rng.uniform(*cfg.amp_scale_range)
    scaled = c * abar
    direction = abar / np.linalg.norm(abar)
    z = rng.normal(0.0, cfg.amp_scatter_frac * scaled.mean(), B)
    amp = scaled + z - np.dot(direction, z) * direction
    amp = np.maximum(amp, 0.0)
    rho0 = rng.uniform(*cfg.phase_range)
    rho = wrap_phase(rho0 + rng.normal(0.0, cfg.phase_jitter, B))
    beta0 = rng.uniform(*cfg.beta0_range, B)
    params = ModelParams(omega, beta0, amp, rho)

    bands = []
    for b in range(B):
        t = np.sort(rng.uniform(0.0, cfg.time_span, cfg.obs_per_band))
        if cfg.noise_scale > 0.0:
            sigma = cfg.noise_scale * rng.uniform(0.8, 1.2, cfg.obs_per_band)
            mag = predict(params, b, t) + rng.normal(0.0, 1.0, cfg.obs_per_band) * sigma
        else:
            # exact model values; unit sigmas keep the weights valid
            sigma = np.ones(cfg.obs_per_band)
            mag = predict(params, b, t)
        bands.append(BandSeries(_band_label(b), t, mag, sigma))
    lc = MultibandLightCurve(star_id, tuple(bands))
    return lc, TruthRecord(star_id, float(period), params)


def simulate(cfg):
    """Generate cfg.n_curves light curves plus their truth records."""
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_curves)
    width = max(4, len(str(cfg.n_curves)))
    curves = []
    truths = []
    for i, child in enumerate(children):
        star_id = f"sim-{i:0{width}d}"
        lc, truth = _simulate_one(star_id, cfg, np.random.default_rng(child))
        curves.append(lc)
        truths.append(truth)
    return curves, truths


def downsample(lc, k_per_band, seed):
    """Random subset of at most k_per_band points in each band.

    Subsets are drawn without replacement and kept in time order. The
    draw for each band depends only on (seed, star_id, band position), so
    downsampling is reproducible curve by curve regardless of batch order.
    Bands at or below the target size are passed through unchanged.
    """
    if k_per_band < 1:
        raise ValidationError("k_per_band must be >= 1")
    if seed < 0:
        raise ValidationError("seed must be >= 0")
    bands = []
    for b, series in enumerate(lc.bands):
        if series.n <= k_per_band:
            bands.append(series)
            continue
        rng = np.random.default_rng(
            np.random.SeedSequence([int(seed), crc32(lc.star_id.encode()), b])
        )
        idx = np.sort(rng.choice(series.n, size=k_per_band, replace=False))
        bands.append(
            BandSeries(series.label, series.time[idx], series.mag[idx], series.sigma[idx])
        )
    return MultibandLightCurve(lc.star_id, tuple(bands))


def split_train_test(items, n_train=100):
    """Leading n_train items as the training split, the rest as test."""
    items = list(items)
    if not 0 < n_train < len(items):
        raise ValidationError(
            f"n_train must be in (0, {len(items)}) (got {n_train})"
        )
    return items[:n_train], items[n_train:]
