"""Shared builders for randomized test instances."""

import numpy as np
import pytest

from mbperiod.model import BandSeries, ModelParams, MultibandLightCurve, predict


def random_params(rng, n_bands, omega=None):
    if omega is None:
        omega = float(rng.uniform(5.0, 30.0))
    return ModelParams(
        omega=omega,
        beta0=rng.uniform(14.0, 20.0, n_bands),
        amp=rng.uniform(0.2, 1.5, n_bands),
        rho=rng.uniform(-np.pi, np.pi, n_bands),
    )


def random_curve(rng, n_bands=3, n_obs=20, span=10.0, noise=0.05,
                 params=None, star_id="rand"):
    """Noisy sinusoidal curve with known generating parameters."""
    if params is None:
        params = random_params(rng, n_bands)
    bands = []
    for b in range(n_bands):
        t = np.sort(rng.uniform(0.0, span, n_obs))
        sigma = rng.uniform(0.05, 0.15, n_obs)
        mag = predict(params, b, t)
        if noise > 0.0:
            mag = mag + noise * rng.standard_normal(n_obs)
        bands.append(BandSeries(f"b{b}", t, mag, sigma))
    return MultibandLightCurve(star_id, tuple(bands)), params


def plausible_state(rng, lc, omega=None):
    """Random parameters whose intercepts sit near the data.

    Keeps the objective O(n) so finite-difference comparisons are not
    dominated by cancellation noise.
    """
    if omega is None:
        omega = float(rng.uniform(5.0, 30.0))
    beta0 = np.array(
        [
            (np.average(b.mag, weights=b.weights) if b.n else 16.0)
            + rng.uniform(-0.5, 0.5)
            for b in lc.bands
        ]
    )
    return ModelParams(
        omega=omega,
        beta0=beta0,
        amp=rng.uniform(0.1, 1.5, lc.n_bands),
        rho=rng.uniform(-np.pi, np.pi, lc.n_bands),
    )


def random_instance(rng, n_bands=None, n_obs=None):
    """(curve, params) with randomized shape, for property loops."""
    if n_bands is None:
        n_bands = int(rng.integers(1, 6))
    if n_obs is None:
        n_obs = int(rng.integers(5, 40))
    return random_curve(rng, n_bands=n_bands, n_obs=n_obs)


@pytest.fixture
def rng():
    return np.random.default_rng(20260817)
