"""Per-frequency profile solver and grid argmin.

The regression oracle below inverts the 3x3 weighted normal equations with
numpy.linalg.solve, independently of the production kernels.
"""

import numpy as np
import pytest

from mbperiod.errors import EstimationError
from mbperiod.grid import FrequencyGrid, build_grid
from mbperiod.mgls import band_solutions, mgls_estimate, nll_profile, solve_band
from mbperiod.model import (
    BandSeries,
    ModelParams,
    MultibandLightCurve,
    nll,
    predict,
    wrap_phase,
)

from conftest import random_curve, random_instance


def oracle_regression(band, omega):
    """Weighted LS of mag on [sin, cos, 1] via dense solve."""
    X = np.column_stack(
        [np.sin(omega * band.time), np.cos(omega * band.time), np.ones(band.n)]
    )
    W = np.diag(band.sigma**-2)
    coef = np.linalg.solve(X.T @ W @ X, X.T @ W @ band.mag)
    resid = band.mag - X @ coef
    rss = 0.5 * resid @ W @ resid
    return coef, rss


def tiny_grid(omegas):
    omegas = np.asarray(omegas, dtype=np.float64)
    d = float(omegas[1] - omegas[0])
    return FrequencyGrid(omegas, d, float(omegas[0]), float(omegas[-1]))


class TestSolveBand:
    def test_normal_equations_oracle(self, rng):
        for _ in range(60):
            lc, _ = random_instance(rng, n_bands=1, n_obs=int(rng.integers(4, 40)))
            band = lc.bands[0]
            omega = float(rng.uniform(3.0, 40.0))
            coef, rss_expect = oracle_regression(band, omega)
            beta0, amp, rho, rss = solve_band(band, omega)
            np.testing.assert_allclose(beta0, coef[2], rtol=1e-9, atol=1e-12)
            np.testing.assert_allclose(
                amp, np.hypot(coef[0], coef[1]), rtol=1e-9, atol=1e-12
            )
            np.testing.assert_allclose(
                rho, wrap_phase(np.arctan2(coef[1], coef[0])), atol=1e-9
            )
            np.testing.assert_allclose(rss, rss_expect, rtol=1e-9, atol=1e-12)

    def test_noiseless_recovery(self, rng):
        for _ in range(20):
            lc, p = random_curve(rng, n_bands=1, n_obs=25, noise=0.0)
            beta0, amp, rho, rss = solve_band(lc.bands[0], p.omega)
            np.testing.assert_allclose(beta0, p.beta0[0], atol=1e-8)
            np.testing.assert_allclose(amp, p.amp[0], atol=1e-8)
            np.testing.assert_allclose(
                np.angle(np.exp(1j * (rho - p.rho[0]))), 0.0, atol=1e-8
            )
            assert rss < 1e-12
            assert amp >= 0.0

    def test_constant_magnitudes(self, rng):
        t = np.sort(rng.uniform(0.0, 10.0, 15))
        band = BandSeries("g", t, np.full(15, 17.25), rng.uniform(0.05, 0.2, 15))
        beta0, amp, rho, rss = solve_band(band, 11.0)
        np.testing.assert_allclose(beta0, 17.25, atol=1e-9)
        assert abs(amp) < 1e-9
        assert rss < 1e-16

    def test_two_points_flagged_degenerate_not_crashing(self):
        band = BandSeries(
            "g", np.array([0.0, 1.0]), np.array([17.0, 18.0]), np.array([0.1, 0.1])
        )
        beta0, amp, rho, rss = solve_band(band, 7.0)
        assert np.isfinite([beta0, amp, rho, rss]).all()


class TestProfile:
    def test_matches_direct_nll(self, rng):
        lc, _ = random_instance(rng, n_bands=3, n_obs=15)
        grid = tiny_grid(np.linspace(5.0, 9.0, 25))
        for point in nll_profile(lc, grid):
            np.testing.assert_allclose(
                point.objective, nll(lc, point.params), rtol=1e-10, atol=1e-10
            )
            assert point.params.omega == point.omega

    def test_profile_is_pointwise_minimum(self, rng):
        # dense random probing in (beta0, amp, rho) never beats the
        # profile value at the same frequency
        lc, p = random_curve(rng, n_bands=2, n_obs=12)
        grid = tiny_grid(np.linspace(p.omega * 0.9, p.omega * 1.1, 5))
        points = nll_profile(lc, grid)
        for point in points:
            for _ in range(200):
                trial = ModelParams(
                    point.omega,
                    point.params.beta0 + rng.normal(0.0, 0.5, 2),
                    np.abs(point.params.amp + rng.normal(0.0, 0.5, 2)),
                    wrap_phase(point.params.rho + rng.normal(0.0, 1.0, 2)),
                )
                assert nll(lc, trial) >= point.objective - 1e-9

    def test_noiseless_minimum_near_truth(self, rng):
        lc, p = random_curve(rng, n_bands=2, n_obs=30, span=8.0, noise=0.0)
        grid = build_grid(
            2 * np.pi / (p.omega * 1.5), 2 * np.pi / (p.omega * 0.5), *lc.time_span()
        )
        res = mgls_estimate(lc, grid)
        assert abs(res.omega - p.omega) <= grid.spacing

    def test_noiseless_zero_at_exact_frequency(self, rng):
        # with truth placed exactly on the grid the profile bottoms out at 0
        lc, p = random_curve(rng, n_bands=2, n_obs=30, span=8.0, noise=0.0)
        grid = tiny_grid(p.omega + 0.01 * np.arange(-5.0, 6.0))
        res = mgls_estimate(lc, grid)
        assert res.omega == p.omega
        assert res.objective < 1e-12


class TestEstimate:
    def test_equals_profile_argmin(self, rng):
        lc, _ = random_instance(rng, n_bands=3, n_obs=20)
        grid = tiny_grid(np.linspace(5.0, 15.0, 80))
        points = nll_profile(lc, grid)
        best = min(range(len(points)), key=lambda g: points[g].objective)
        res = mgls_estimate(lc, grid)
        assert res.omega == points[best].omega
        np.testing.assert_allclose(res.objective, points[best].objective, rtol=1e-14)

    def test_hand_built_middle_frequency(self, rng):
        omegas = np.array([8.0, 10.0, 12.0])
        t = np.sort(rng.uniform(0.0, 6.0, 40))
        mag = 1.2 * np.sin(10.0 * t + 0.4) + 16.0
        band = BandSeries("g", t, mag, np.full(40, 0.1))
        lc = MultibandLightCurve("mid", (band,))
        res = mgls_estimate(lc, tiny_grid(omegas))
        assert res.omega == 10.0

    def test_tie_breaks_to_lowest_frequency(self, rng):
        # identically zero magnitudes give rss exactly 0.0 at every
        # frequency, so every grid point ties and the lowest omega wins
        t = np.sort(rng.uniform(0.0, 10.0, 15))
        band = BandSeries("g", t, np.zeros(15), np.full(15, 0.1))
        lc = MultibandLightCurve("tie", (band,))
        grid = tiny_grid(np.array([5.0, 6.0, 7.0]))
        points = nll_profile(lc, grid)
        assert {p.objective for p in points} == {0.0}
        res = mgls_estimate(lc, grid)
        assert res.omega == 5.0

    def test_band_permutation_invariance(self, rng):
        lc, _ = random_instance(rng, n_bands=4, n_obs=15)
        perm = rng.permutation(4)
        shuffled = MultibandLightCurve(lc.star_id, tuple(lc.bands[i] for i in perm))
        grid = tiny_grid(np.linspace(6.0, 14.0, 40))
        a = mgls_estimate(lc, grid)
        b = mgls_estimate(shuffled, grid)
        assert a.omega == b.omega
        np.testing.assert_allclose(a.objective, b.objective, rtol=1e-12)
        np.testing.assert_allclose(a.params.amp[perm], b.params.amp, rtol=1e-9)

    def test_constant_offset_shifts_intercept_only(self, rng):
        lc, _ = random_instance(rng, n_bands=3, n_obs=18)
        c = 2.75
        bands = list(lc.bands)
        bands[1] = BandSeries(
            bands[1].label, bands[1].time, bands[1].mag + c, bands[1].sigma
        )
        shifted = MultibandLightCurve(lc.star_id, tuple(bands))
        grid = tiny_grid(np.linspace(6.0, 14.0, 40))
        a = mgls_estimate(lc, grid)
        b = mgls_estimate(shifted, grid)
        assert a.omega == b.omega
        np.testing.assert_allclose(a.objective, b.objective, rtol=1e-9)
        np.testing.assert_allclose(
            b.params.beta0[1] - a.params.beta0[1], c, rtol=1e-9
        )
        np.testing.assert_allclose(b.params.amp, a.params.amp, rtol=1e-8, atol=1e-10)

    def test_all_degenerate_profile_rejected(self):
        band = BandSeries(
            "g", np.array([0.0, 1.0]), np.array([17.0, 17.5]), np.array([0.1, 0.1])
        )
        lc = MultibandLightCurve("thin", (band,))
        grid = tiny_grid(np.array([5.0, 6.0]))
        with pytest.raises(EstimationError):
            mgls_estimate(lc, grid)

    def test_result_metadata(self, rng):
        lc, _ = random_instance(rng, n_bands=2, n_obs=20)
        grid = tiny_grid(np.linspace(6.0, 10.0, 30))
        res = mgls_estimate(lc, grid)
        assert res.method == "mgls"
        assert res.star_id == lc.star_id
        assert res.band_labels == lc.labels
        assert res.n_pnll_evals == 0
        assert res.profile is not None
        assert res.profile.omegas.size == grid.n
        np.testing.assert_allclose(res.period, 2 * np.pi / res.omega, rtol=1e-15)


class TestBandSolutions:
    def test_matches_scalar_solver(self, rng):
        lc, _ = random_instance(rng, n_bands=3, n_obs=14)
        omega = 9.3
        params, degen = band_solutions(lc, omega)
        for b, band in enumerate(lc.bands):
            beta0, amp, rho, _ = solve_band(band, omega)
            np.testing.assert_allclose(params.beta0[b], beta0, rtol=1e-12)
            np.testing.assert_allclose(params.amp[b], amp, rtol=1e-12)
            np.testing.assert_allclose(params.rho[b], rho, atol=1e-12)
        assert not degen.any()
