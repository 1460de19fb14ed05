"""Data-driven selection of the penalty strengths.

The idea: well-sampled historical curves from the same survey tell us how
much real scatter amplitudes and phases have across bands. Penalized fits
on sparse curves should show about the same scatter; too little means the
penalty is crushing real structure, too much means it is not helping. Each
gamma is chosen so the median per-curve scatter of the penalized estimates
on a tune set matches the historical median, via bracketing on a log grid
and bisection in log space.

Scatter statistics (no half factor, unlike the penalty terms):
    amplitude: a^T (I - a_tilde a_tilde^T) a
    phase:     rho^T (I - (1/B) 11^T) rho  after seam-safe rewrapping
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._parallel import pmap
from .bcd import BcdSettings
from .errors import EstimationError, ValidationError
from .grid import build_grid
from .mgls import FrequencyProfile, _profile_arrays, mgls_estimate
from .model import PenaltyConfig, wrap_phase
from .pruning import pgls_estimate

DEFAULT_BRACKET = (1e-3, 1e6)
BRACKET_FACTOR = 10.0
GAMMA_RTOL = 0.05  # stop when successive trial gammas differ by < 5%
PERIOD_RTOL = 0.01  # stop when no tune-set period moves by more than 1%
MAX_BISECTIONS = 60


def amp_scatter(amp, a_tilde):
    """Squared distance of one amplitude vector from the a_tilde ray."""
    amp = np.asarray(amp, dtype=np.float64)
    dev = amp - np.dot(a_tilde, amp) * a_tilde
    return float(np.dot(dev, dev))


def recenter_phases(rho):
    """Rewrap a phase vector so no entry is split across the +-pi seam.

    Entries are expressed as circular-mean + deviation with deviations in
    [-pi, pi). The scatter statistic is invariant to shifting the whole
    vector, so only this seam handling matters.
    """
    rho = wrap_phase(np.asarray(rho, dtype=np.float64))
    center = np.arctan2(np.sin(rho).mean(), np.cos(rho).mean())
    return center + wrap_phase(rho - center)


def phase_scatter(rho):
    """Squared scatter of one phase vector around its mean, seam-safe."""
    rho = recenter_phases(rho)
    dev = rho - rho.mean()
    return float(np.dot(dev, dev))


@dataclass(frozen=True)
class HistoricalReference:
    """Targets extracted from well-sampled curves.

    a_tilde is the normalized mean of the per-curve amplitude vectors;
    s_a_target and s_rho_target are the median per-curve scatters around
    a_tilde and around each curve's mean phase.
    """

    a_tilde: np.ndarray
    s_a_target: float
    s_rho_target: float
    band_labels: tuple[str, ...]
    n_curves: int

    def __post_init__(self):
        a_tilde = np.asarray(self.a_tilde, dtype=np.float64).copy()
        a_tilde.setflags(write=False)
        object.__setattr__(self, "a_tilde", a_tilde)

    def penalty_config(self, gamma1, gamma2):
        return PenaltyConfig(gamma1, gamma2, self.a_tilde)


def _check_bands(curves):
    labels = curves[0].labels
    for lc in curves[1:]:
        if lc.labels != labels:
            raise ValidationError(
                f"star {lc.star_id!r}: band labels {lc.labels} differ from {labels}"
            )
    return labels


def fit_reference(curves, period_min, period_max, *, grid=None, threads=1):
    """Historical targets from unpenalized fits of well-sampled curves."""
    curves = list(curves)
    if len(curves) < 2:
        raise ValidationError("need at least 2 historical curves")
    labels = _check_bands(curves)

    def one(lc):
        g = grid if grid is not None else build_grid(period_min, period_max, *lc.time_span())
        return mgls_estimate(lc, g)

    fits = pmap(one, curves, threads)
    amps = np.array([f.params.amp for f in fits])
    rhos = np.array([f.params.rho for f in fits])
    mean_amp = amps.mean(axis=0)
    norm = float(np.linalg.norm(mean_amp))
    if norm <= 0.0:
        raise EstimationError("historical amplitudes are all zero")
    a_tilde = mean_amp / norm
    s_a = float(np.median([amp_scatter(a, a_tilde) for a in amps]))
    s_rho = float(np.median([phase_scatter(r) for r in rhos]))
    return HistoricalReference(
        a_tilde=a_tilde,
        s_a_target=s_a,
        s_rho_target=s_rho,
        band_labels=labels,
        n_curves=len(curves),
    )


# ---------------------------------------------------------------------------
# tune-set evaluation with cached profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TuneSet:
    """Tune curves with their grids and precomputed profile objectives.

    The profile objective does not depend on the penalties, so it is
    scanned once per curve and reused for every trial gamma.
    """

    items: tuple

    @classmethod
    def prepare(cls, curves, period_min, period_max, *, grid=None, threads=1):
        curves = list(curves)
        if not curves:
            raise ValidationError("empty tune set")
        _check_bands(curves)

        def one(lc):
            g = grid if grid is not None else build_grid(
                period_min, period_max, *lc.time_span()
            )
            ell, excluded, _detail = _profile_arrays(lc, g)
            return lc, g, FrequencyProfile(g.omegas, ell, excluded)

        return cls(items=tuple(pmap(one, curves, threads)))

    def __len__(self):
        return len(self.items)


def _as_tune_set(tune, period_min, period_max, threads):
    if isinstance(tune, TuneSet):
        return tune
    if period_min is None or period_max is None:
        raise ValidationError("period bounds are required to prepare a tune set")
    return TuneSet.prepare(tune, period_min, period_max, threads=threads)


def _fit_tune_set(tune_set, cfg, settings, eval_cap, threads):
    def one(item):
        lc, g, prof = item
        return pgls_estimate(lc, g, cfg, settings, eval_cap=eval_cap, profile=prof)

    return pmap(one, tune_set.items, threads)


@dataclass(frozen=True)
class GammaSearchResult:
    """Outcome of one gamma search.

    stopped_by is one of "target_at_zero", "period_stability",
    "gamma_tolerance", "bracket_endpoint", or "max_bisections". trials
    holds every evaluated (gamma, scatter) pair in evaluation order.
    """

    gamma: float
    scatter: float
    target: float
    n_trials: int
    stopped_by: str
    warning: str | None
    trials: tuple


def _periods_stable(prev, curr):
    prev = np.asarray(prev)
    curr = np.asarray(curr)
    return bool(np.all(np.abs(curr - prev) <= PERIOD_RTOL * prev))


def _search_gamma(eval_at, target, bracket, what):
    """Shared bracket-then-bisect search; eval_at(g) -> (scatter, periods).

    The scatter decreases (weakly) as gamma grows, so bracketing walks up a
    log-spaced grid until the target is crossed, then bisects in log space.
    Termination: trial gammas within GAMMA_RTOL of each other, or an update
    that leaves every tune-set period within PERIOD_RTOL.
    """
    trials = []

    def run(g):
        s, periods = eval_at(g)
        trials.append((g, s))
        return s, periods

    s0, periods0 = run(0.0)
    if s0 <= target:
        return GammaSearchResult(
            gamma=0.0,
            scatter=s0,
            target=target,
            n_trials=len(trials),
            stopped_by="target_at_zero",
            warning=None,
            trials=tuple(trials),
        )

    # bracket walk: find the first grid gamma whose scatter crosses the
    # target; the period-stability rule applies only to bisection
    # refinements, where a stalled update means further precision in gamma
    # cannot matter
    lo = None
    hi = None
    prev_periods = periods0
    prev_gamma = 0.0
    g = bracket[0]
    while g <= bracket[1] * (1.0 + 1e-12):
        s, periods = run(g)
        prev_periods = periods
        prev_gamma = g
        if s <= target:
            hi = g
            hi_scatter = s
            break
        lo = g
        g *= BRACKET_FACTOR
    if hi is None:
        g_end, s_end = trials[-1]
        return GammaSearchResult(
            gamma=g_end,
            scatter=s_end,
            target=target,
            n_trials=len(trials),
            stopped_by="bracket_endpoint",
            warning=(
                f"{what} target {target:.6g} unreachable within bracket "
                f"{bracket!r}; returning the endpoint"
            ),
            trials=tuple(trials),
        )
    if lo is None:
        # target crossed at the very first bracket point; bisect below it
        lo = hi / BRACKET_FACTOR

    mid = hi
    s_mid = hi_scatter
    for _ in range(MAX_BISECTIONS):
        mid = float(np.sqrt(lo * hi))
        s_mid, periods = run(mid)
        if _periods_stable(prev_periods, periods):
            return GammaSearchResult(
                gamma=mid,
                scatter=s_mid,
                target=target,
                n_trials=len(trials),
                stopped_by="period_stability",
                warning=None,
                trials=tuple(trials),
            )
        prev_periods = periods
        if s_mid > target:
            lo = mid
        else:
            hi = mid
        if abs(mid - prev_gamma) < GAMMA_RTOL * prev_gamma:
            return GammaSearchResult(
                gamma=mid,
                scatter=s_mid,
                target=target,
                n_trials=len(trials),
                stopped_by="gamma_tolerance",
                warning=None,
                trials=tuple(trials),
            )
        prev_gamma = mid
    return GammaSearchResult(
        gamma=mid,
        scatter=s_mid,
        target=target,
        n_trials=len(trials),
        stopped_by="max_bisections",
        warning="bisection budget exhausted before the stopping rules fired",
        trials=tuple(trials),
    )


def select_gamma1(
    tune,
    ref,
    period_min=None,
    period_max=None,
    *,
    gamma2=0.0,
    settings=None,
    eval_cap=None,
    bracket=DEFAULT_BRACKET,
    threads=1,
):
    """Amplitude penalty strength matching the historical amplitude scatter.

    Penalized fits run with the trial gamma1 and the supplied gamma2
    (zero unless the phase penalty was tuned first).
    """
    tune_set = _as_tune_set(tune, period_min, period_max, threads)
    if settings is None:
        settings = BcdSettings()

    def eval_at(g1):
        cfg = ref.penalty_config(g1, gamma2)
        fits = _fit_tune_set(tune_set, cfg, settings, eval_cap, threads)
        scatters = [amp_scatter(f.params.amp, ref.a_tilde) for f in fits]
        periods = [f.period for f in fits]
        return float(np.median(scatters)), periods

    return _search_gamma(eval_at, ref.s_a_target, bracket, "amplitude scatter")


def select_gamma2(
    tune,
    ref,
    period_min=None,
    period_max=None,
    *,
    gamma1=0.0,
    settings=None,
    eval_cap=None,
    bracket=DEFAULT_BRACKET,
    threads=1,
):
    """Phase penalty strength matching the historical phase scatter."""
    tune_set = _as_tune_set(tune, period_min, period_max, threads)
    if settings is None:
        settings = BcdSettings()

    def eval_at(g2):
        cfg = ref.penalty_config(gamma1, g2)
        fits = _fit_tune_set(tune_set, cfg, settings, eval_cap, threads)
        scatters = [phase_scatter(f.params.rho) for f in fits]
        periods = [f.period for f in fits]
        return float(np.median(scatters)), periods

    return _search_gamma(eval_at, ref.s_rho_target, bracket, "phase scatter")


def tune_gammas(
    tune,
    ref,
    period_min=None,
    period_max=None,
    *,
    order="amp_first",
    settings=None,
    eval_cap=None,
    bracket=DEFAULT_BRACKET,
    threads=1,
):
    """Select both penalties sequentially.

    "amp_first" tunes gamma1 with gamma2 = 0 and then gamma2 with gamma1
    held at its selected value; "phase_first" is the mirror image. Returns
    (gamma1 result, gamma2 result, PenaltyConfig).
    """
    if order not in ("amp_first", "phase_first"):
        raise ValidationError(f"unknown tuning order {order!r}")
    tune_set = _as_tune_set(tune, period_min, period_max, threads)
    kw = dict(settings=settings, eval_cap=eval_cap, bracket=bracket, threads=threads)
    if order == "amp_first":
        r1 = select_gamma1(tune_set, ref, **kw)
        r2 = select_gamma2(tune_set, ref, gamma1=r1.gamma, **kw)
    else:
        r2 = select_gamma2(tune_set, ref, **kw)
        r1 = select_gamma1(tune_set, ref, gamma2=r2.gamma, **kw)
    return r1, r2, ref.penalty_config(r1.gamma, r2.gamma)
