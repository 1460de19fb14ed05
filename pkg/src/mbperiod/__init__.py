"""Multiband period estimation via penalized least squares."""

from .bcd import BcdResult, BcdSettings, bcd_fit
from .errors import EstimationError, ValidationError
from .grid import FrequencyGrid, build_grid, grid_from_bounds
from .io import (
    AccuracyReport,
    evaluate,
    ingest,
    read_fit_results,
    read_truth,
    write_accuracy,
    write_fit_results,
    write_lightcurves,
    write_periodogram,
    write_truth,
)
from .kernels import BACKEND
from .mgls import (
    FitResult,
    FrequencyProfile,
    ProfilePoint,
    PruningStats,
    band_solutions,
    mgls_estimate,
    nll_profile,
    solve_band,
)
from .model import (
    BandSeries,
    ModelParams,
    MultibandLightCurve,
    PenaltyConfig,
    canonicalize,
    nll,
    penalty_j1,
    penalty_j2,
    pnll,
    predict,
    wrap_phase,
)
from .pruning import pgls_estimate
from .synth import SimConfig, TruthRecord, downsample, simulate, split_train_test
from .tuning import (
    GammaSearchResult,
    HistoricalReference,
    TuneSet,
    fit_reference,
    select_gamma1,
    select_gamma2,
    tune_gammas,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyReport",
    "BACKEND",
    "BandSeries",
    "BcdResult",
    "BcdSettings",
    "EstimationError",
    "FitResult",
    "FrequencyGrid",
    "FrequencyProfile",
    "GammaSearchResult",
    "HistoricalReference",
    "ModelParams",
    "MultibandLightCurve",
    "PenaltyConfig",
    "ProfilePoint",
    "PruningStats",
    "SimConfig",
    "TruthRecord",
    "TuneSet",
    "ValidationError",
    "band_solutions",
    "bcd_fit",
    "build_grid",
    "canonicalize",
    "downsample",
    "evaluate",
    "fit_reference",
    "grid_from_bounds",
    "ingest",
    "mgls_estimate",
    "nll",
    "nll_profile",
    "penalty_j1",
    "penalty_j2",
    "pgls_estimate",
    "pnll",
    "predict",
    "read_fit_results",
    "read_truth",
    "select_gamma1",
    "select_gamma2",
    "simulate",
    "solve_band",
    "split_train_test",
    "tune_gammas",
    "wrap_phase",
    "write_accuracy",
    "write_fit_results",
    "write_lightcurves",
    "write_periodogram",
    "write_truth",
]
