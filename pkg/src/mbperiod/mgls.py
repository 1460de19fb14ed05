"""Profile objective over a frequency grid and its unpenalized argmin.

At a fixed frequency the per-band model is linear in (amp*cos(rho),
amp*sin(rho), beta0), so the best parameters come from a weighted 3x3
normal solve per band. Minimizing out the parameters band by band yields
the profile objective ell(omega); scanning a grid and taking the argmin is
the baseline period estimator here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import EstimationError, ValidationError
from .model import ModelParams, wrap_phase


@dataclass(frozen=True)
class ProfilePoint:
    """One grid frequency: objective, best-fit parameters, degeneracy flags."""

    omega: float
    objective: float
    params: ModelParams
    degenerate: tuple[bool, ...]

    @property
    def all_degenerate(self):
        return all(self.degenerate)


@dataclass(frozen=True)
class FrequencyProfile:
    """Objective values along the grid.

    nll is always filled; pnll is present only for penalized fits and holds
    NaN at frequencies that pruning never evaluated. excluded marks
    frequencies where every non-empty band was degenerate.
    """

    omegas: np.ndarray
    nll: np.ndarray
    excluded: np.ndarray
    pnll: np.ndarray | None = None


@dataclass(frozen=True)
class PruningStats:
    """Bookkeeping from a pruned penalized search."""

    grid_size: int
    n_evaluated: int
    n_excluded_degenerate: int
    best_objective: float
    complete: bool
    eval_cap: int | None = None


@dataclass(frozen=True)
class FitResult:
    """A period fit for one star.

    band_ok marks bands whose parameters are meaningful; a band with no
    data (or a degenerate solve) keeps placeholder zeros in params and is
    reported as absent by the writers.
    """

    star_id: str
    method: str
    band_labels: tuple[str, ...]
    params: ModelParams
    objective: float
    converged: bool
    n_pnll_evals: int
    band_ok: tuple[bool, ...]
    profile: FrequencyProfile | None = None
    pruning: PruningStats | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def omega(self):
        return self.params.omega

    @property
    def period(self):
        return self.params.period


def _coeffs_to_amp_rho(cs, cc):
    """Convert linear coefficients to nonnegative amplitude and phase.

    The regression is on [sin, cos], so cs = amp*cos(rho), cc =
    amp*sin(rho); the hypot/atan2 form gives amp >= 0 directly.
    """
    amp = np.hypot(cs, cc)
    rho = wrap_phase(np.arctan2(cc, cs))
    return amp, rho


def solve_band(band, omega):
    """Best-fit (beta0, amp, rho, rss) for one band at one frequency.

    rss is the band's contribution to the profile objective, i.e. half the
    weighted residual sum of squares at the minimizer.
    """
    if band.n == 0:
        raise ValidationError(f"band {band.label!r}: no observations")
    omega = float(omega)
    if not np.isfinite(omega) or omega <= 0.0:
        raise ValidationError("omega must be finite and > 0")
    beta0, cs, cc, rss, _bad = kernels.solve_band(
        band.time, band.mag, band.weights, omega
    )
    amp, rho = _coeffs_to_amp_rho(cs, cc)
    return float(beta0), float(amp), float(rho), float(rss)


def band_solutions(lc, omega):
    """ModelParams and degeneracy flags from per-band solves at omega.

    Empty bands get zero parameters and a degenerate flag; they carry no
    information at any frequency.
    """
    B = lc.n_bands
    beta0 = np.zeros(B)
    amp = np.zeros(B)
    rho = np.zeros(B)
    degen = np.zeros(B, dtype=bool)
    for b, series in enumerate(lc.bands):
        if series.n == 0:
            degen[b] = True
            continue
        b0, cs, cc, _rss, bad = kernels.solve_band(
            series.time, series.mag, series.weights, float(omega)
        )
        beta0[b] = b0
        amp[b], rho[b] = _coeffs_to_amp_rho(cs, cc)
        degen[b] = bad
    return ModelParams(float(omega), beta0, amp, rho), degen


def _profile_arrays(lc, grid):
    """(ell, excluded, detail) along the grid; excluded marks frequencies
    where every non-empty band is degenerate."""
    if lc.n_obs == 0:
        raise ValidationError(f"star {lc.star_id!r}: no observations")
    t, m, w, offsets = lc.packed
    ell, beta0, cs, cc, degen = kernels.profile_detail(t, m, w, offsets, grid.omegas)
    nonempty = offsets[1:] > offsets[:-1]
    excluded = degen[:, nonempty].all(axis=1)
    return ell, excluded, (beta0, cs, cc, degen)


def nll_profile(lc, grid):
    """Profile objective at every grid frequency, as ProfilePoints."""
    ell, _excluded, (beta0, cs, cc, degen) = _profile_arrays(lc, grid)
    amp, rho = _coeffs_to_amp_rho(cs, cc)
    points = []
    for g, omega in enumerate(grid.omegas):
        params = ModelParams(float(omega), beta0[g], amp[g], rho[g])
        points.append(
            ProfilePoint(float(omega), float(ell[g]), params, tuple(map(bool, degen[g])))
        )
    return points


def mgls_estimate(lc, grid):
    """Argmin of the profile objective over the grid.

    Frequencies where every non-empty band is degenerate are excluded from
    the argmin; ties break to the lowest frequency (argmin returns the
    first minimum on an ascending grid).
    """
    ell, excluded, (beta0, cs, cc, degen) = _profile_arrays(lc, grid)
    usable = ~excluded
    if not usable.any():
        raise EstimationError(
            f"star {lc.star_id!r}: every grid frequency is degenerate"
        )
    masked = np.where(usable, ell, np.inf)
    g = int(np.argmin(masked))
    amp, rho = _coeffs_to_amp_rho(cs[g], cc[g])
    params = ModelParams(float(grid.omegas[g]), beta0[g], amp, rho)
    profile = FrequencyProfile(grid.omegas, ell, excluded)
    band_ok = tuple(bool(ok) for ok in ~degen[g])
    return FitResult(
        star_id=lc.star_id,
        method="mgls",
        band_labels=lc.labels,
        params=params,
        objective=float(ell[g]),
        converged=True,
        n_pnll_evals=0,
        band_ok=band_ok,
        profile=profile,
        diagnostics={"grid_index": g, "n_excluded_degenerate": int(excluded.sum())},
    )
