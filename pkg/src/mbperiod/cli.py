"""Command line interface.

Subcommands: fit, tune, simulate, downsample, evaluate, periodogram. Every
subcommand accepts --config pointing at a JSON file whose keys mirror the
long flag names (dashes as underscores); explicit flags override the file.

Exit codes: 0 success, 1 validation failure (bad flags, malformed files,
inconsistent configuration), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys

import numpy as np

from . import io
from ._parallel import pmap
from .bcd import BcdSettings
from .errors import ValidationError
from .grid import build_grid, grid_from_bounds
from .mgls import mgls_estimate
from .model import BandSeries, MultibandLightCurve, PenaltyConfig
from .pruning import pgls_estimate
from .synth import SimConfig, downsample, simulate
from .tuning import TuneSet, fit_reference, select_gamma1, select_gamma2, tune_gammas

THREADS_ENV = "MBPERIOD_THREADS"
TWO_PI = 2.0 * np.pi


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage errors exit with the validation code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise ValidationError(f"--{name.replace('_', '-')} is required")


def _merge_config(args, defaults):
    """Fill unset options from --config JSON, then from built-in defaults."""
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ValidationError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{args.config}: invalid JSON ({exc})") from None
        if not isinstance(loaded, dict):
            raise ValidationError(f"{args.config}: config must be a JSON object")
        known = vars(args)
        for key, value in loaded.items():
            if key not in known or key in ("config", "command"):
                raise ValidationError(f"{args.config}: unknown option {key!r}")
            if known[key] is None:
                setattr(args, key, value)
    for key, value in defaults.items():
        if getattr(args, key) is None:
            setattr(args, key, value)
    return args


def _resolve_threads(value):
    if value is not None:
        threads = value
    elif os.environ.get(THREADS_ENV):
        raw = os.environ[THREADS_ENV]
        try:
            threads = int(raw)
        except ValueError:
            raise ValidationError(f"{THREADS_ENV}={raw!r} is not an integer") from None
    else:
        threads = os.cpu_count() or 1
    if threads < 1:
        raise ValidationError("threads must be >= 1")
    return threads


def _parse_gamma(text):
    """Penalty strength flag: a float or the string 'auto'."""
    if text is None:
        return 0.0
    if isinstance(text, (int, float)):
        value = float(text)
    else:
        if text.strip().lower() == "auto":
            return "auto"
        try:
            value = float(text)
        except ValueError:
            raise ValidationError(f"gamma must be a number or 'auto' (got {text!r})")
    if not np.isfinite(value) or value < 0.0:
        raise ValidationError("gamma must be finite and >= 0")
    return value


def _star_grid(lc, args):
    if args.grid_spacing is not None:
        if args.grid_spacing <= 0:
            raise ValidationError("grid-spacing must be > 0")
        grid = grid_from_bounds(
            TWO_PI / args.period_max, TWO_PI / args.period_min, args.grid_spacing
        )
    else:
        grid = build_grid(args.period_min, args.period_max, *lc.time_span())
    if args.max_grid_size is not None:
        if args.max_grid_size < 2:
            raise ValidationError("max-grid-size must be >= 2")
        if grid.n > args.max_grid_size:
            # coarsen by an integer factor so the cap is met
            factor = int(np.ceil(grid.n / args.max_grid_size))
            grid = grid_from_bounds(
                grid.omega_min, grid.omega_max, grid.spacing * factor
            )
    return grid


def _filter_bands(lc, wanted):
    present = {b.label: b for b in lc.bands}
    kept = tuple(present[label] for label in wanted if label in present)
    if not kept:
        raise ValidationError(
            f"star {lc.star_id!r}: none of the requested bands "
            f"{wanted} are present"
        )
    return MultibandLightCurve(lc.star_id, kept)


def _check_periods(args):
    _require(args, "period_min", "period_max")
    if args.period_min <= 0 or args.period_max <= args.period_min:
        raise ValidationError("need 0 < period-min < period-max")


def _safe_name(star_id):
    return re.sub(r"[^A-Za-z0-9._-]", "_", star_id)


def _align_a_tilde(ref, labels):
    """Reference direction restricted to this star's bands, renormalized."""
    index = {label: i for i, label in enumerate(ref.band_labels)}
    missing = [label for label in labels if label not in index]
    if missing:
        raise ValidationError(
            f"bands {missing} absent from the historical reference"
        )
    sub = np.array([ref.a_tilde[index[label]] for label in labels])
    norm = float(np.linalg.norm(sub))
    if norm <= 0.0:
        raise ValidationError("reference direction vanishes on these bands")
    return sub / norm


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

_FIT_DEFAULTS = {
    "method": "mgls",
    "gamma1": 0.0,
    "gamma2": 0.0,
    "tune_size": 100,
    "tol_rel": 1e-8,
    "max_rounds": 1000,
}


def cmd_fit(args):
    _merge_config(args, _FIT_DEFAULTS)
    _require(args, "input", "output")
    _check_periods(args)
    if args.method not in ("mgls", "pgls", "both"):
        raise ValidationError(f"unknown method {args.method!r}")
    threads = _resolve_threads(args.threads)
    gamma1 = _parse_gamma(args.gamma1)
    gamma2 = _parse_gamma(args.gamma2)

    curves = io.ingest(args.input)
    if args.bands:
        wanted = [b.strip() for b in args.bands.split(",") if b.strip()]
        filtered = []
        failures = []
        for lc in curves:
            try:
                filtered.append(_filter_bands(lc, wanted))
            except ValidationError as exc:
                failures.append((lc.star_id, args.method, str(exc)))
        curves = filtered
        early_failures = failures
    else:
        early_failures = []

    settings = BcdSettings(rel_tol=args.tol_rel, max_rounds=args.max_rounds)
    needs_pgls = args.method in ("pgls", "both")

    ref = None
    if (gamma1 == "auto" or gamma2 == "auto") and not needs_pgls:
        raise ValidationError("auto gamma tuning requires a penalized method")
    if gamma1 == "auto" or gamma2 == "auto":
        if not args.historical:
            raise ValidationError("auto gamma tuning requires --historical")
        historical = io.ingest(args.historical)
        ref = fit_reference(
            historical, args.period_min, args.period_max, threads=threads
        )
        tune_curves = curves[: args.tune_size]
        tune_set = TuneSet.prepare(
            tune_curves, args.period_min, args.period_max, threads=threads
        )
        kw = dict(settings=settings, eval_cap=args.eval_cap, threads=threads)
        if gamma1 == "auto" and gamma2 == "auto":
            r1, r2, _cfg = tune_gammas(tune_set, ref, **kw)
            gamma1, gamma2 = r1.gamma, r2.gamma
        elif gamma1 == "auto":
            gamma1 = select_gamma1(tune_set, ref, gamma2=gamma2, **kw).gamma
        else:
            gamma2 = select_gamma2(tune_set, ref, gamma1=gamma1, **kw).gamma
        print(f"tuned gamma1={gamma1:.6g} gamma2={gamma2:.6g}", file=sys.stderr)
    elif needs_pgls and args.historical:
        if gamma1 == 0.0 and gamma2 == 0.0:
            print(
                "note: --historical given but gamma1=gamma2=0; pass "
                "--gamma1 auto --gamma2 auto to tune the penalties",
                file=sys.stderr,
            )
        historical = io.ingest(args.historical)
        ref = fit_reference(
            historical, args.period_min, args.period_max, threads=threads
        )

    def fit_star(lc):
        try:
            grid = _star_grid(lc, args)
            out = []
            mgls_res = None
            if args.method in ("mgls", "both"):
                mgls_res = mgls_estimate(lc, grid)
                out.append(mgls_res)
            if needs_pgls:
                if ref is not None:
                    a_tilde = _align_a_tilde(ref, lc.labels)
                    cfg = PenaltyConfig(gamma1, gamma2, a_tilde)
                else:
                    cfg = PenaltyConfig.uniform(lc.n_bands, gamma1, gamma2)
                profile = mgls_res.profile if mgls_res is not None else None
                out.append(
                    pgls_estimate(
                        lc, grid, cfg, settings,
                        eval_cap=args.eval_cap, profile=profile,
                    )
                )
            return lc.star_id, out, None
        except Exception as exc:  # noqa: BLE001 - per-star isolation
            return lc.star_id, [], f"{type(exc).__name__}: {exc}"

    fitted = pmap(fit_star, curves, threads)
    results = []
    failures = list(early_failures)
    for star_id, out, err in fitted:
        if err is not None:
            failures.append((star_id, args.method, err))
            print(f"fit failed for {star_id}: {err}", file=sys.stderr)
        results.extend(out)
    if not results and failures:
        raise ValidationError("every star failed to fit")
    io.write_fit_results(args.output, results, failures)

    if args.periodogram_dir:
        os.makedirs(args.periodogram_dir, exist_ok=True)
        for res in results:
            if res.profile is None:
                continue
            name = f"{_safe_name(res.star_id)}.{res.method}.csv"
            io.write_periodogram(os.path.join(args.periodogram_dir, name), res.profile)
    print(f"wrote {len(results)} fits to {args.output}"
          + (f" ({len(failures)} failures)" if failures else ""))
    return 0


# ---------------------------------------------------------------------------
# tune
# ---------------------------------------------------------------------------

_TUNE_DEFAULTS = {
    "tune_size": 100,
    "order": "amp_first",
    "tol_rel": 1e-8,
    "max_rounds": 1000,
}


def cmd_tune(args):
    _merge_config(args, _TUNE_DEFAULTS)
    _require(args, "historical", "input")
    _check_periods(args)
    if args.order not in ("amp_first", "phase_first"):
        raise ValidationError(f"unknown order {args.order!r}")
    threads = _resolve_threads(args.threads)
    settings = BcdSettings(rel_tol=args.tol_rel, max_rounds=args.max_rounds)

    historical = io.ingest(args.historical)
    ref = fit_reference(historical, args.period_min, args.period_max, threads=threads)
    tune_curves = io.ingest(args.input)[: args.tune_size]
    tune_set = TuneSet.prepare(
        tune_curves, args.period_min, args.period_max, threads=threads
    )
    r1, r2, _cfg = tune_gammas(
        tune_set, ref, order=args.order, settings=settings,
        eval_cap=args.eval_cap, threads=threads,
    )
    payload = {
        "gamma1": r1.gamma,
        "gamma2": r2.gamma,
        "s_a_target": ref.s_a_target,
        "s_rho_target": ref.s_rho_target,
        "a_tilde": [float(x) for x in ref.a_tilde],
        "band_labels": list(ref.band_labels),
        "n_historical": ref.n_curves,
        "n_tune": len(tune_set),
        "gamma1_search": {
            "scatter": r1.scatter, "target": r1.target, "n_trials": r1.n_trials,
            "stopped_by": r1.stopped_by, "warning": r1.warning,
        },
        "gamma2_search": {
            "scatter": r2.scatter, "target": r2.target, "n_trials": r2.n_trials,
            "stopped_by": r2.stopped_by, "warning": r2.warning,
        },
    }
    text = json.dumps(payload, indent=2)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(f"wrote tuning result to {args.output}")
    else:
        print(text)
    for result in (r1, r2):
        if result.warning:
            print(f"warning: {result.warning}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# simulate / downsample
# ---------------------------------------------------------------------------

_SIM_DEFAULTS = {
    "n_curves": 500,
    "n_bands": 5,
    "period_min": 0.2,
    "period_max": 1.0,
    "obs_per_band": 30,
    "noise_scale": 0.2,
    "time_span": 1000.0,
    "seed": 0,
}


def cmd_simulate(args):
    _merge_config(args, _SIM_DEFAULTS)
    _require(args, "output")
    cfg = SimConfig(
        n_curves=args.n_curves,
        n_bands=args.n_bands,
        period_range=(args.period_min, args.period_max),
        obs_per_band=args.obs_per_band,
        noise_scale=args.noise_scale,
        time_span=args.time_span,
        seed=args.seed,
    )
    curves, truths = simulate(cfg)
    io.write_lightcurves(args.output, curves)
    print(f"wrote {len(curves)} curves to {args.output}")
    if args.truth:
        io.write_truth(args.truth, truths)
        print(f"wrote truth table to {args.truth}")
    return 0


_DOWNSAMPLE_DEFAULTS = {"seed": 0}


def cmd_downsample(args):
    _merge_config(args, _DOWNSAMPLE_DEFAULTS)
    _require(args, "input", "output", "per_band")
    if args.per_band < 1:
        raise ValidationError("per-band must be >= 1")
    curves = io.ingest(args.input)
    thinned = [downsample(lc, args.per_band, args.seed) for lc in curves]
    io.write_lightcurves(args.output, thinned)
    print(f"wrote {len(thinned)} downsampled curves to {args.output}")
    return 0


# ---------------------------------------------------------------------------
# evaluate / periodogram
# ---------------------------------------------------------------------------

_EVAL_DEFAULTS = {"tol": 0.01}


def cmd_evaluate(args):
    _merge_config(args, _EVAL_DEFAULTS)
    _require(args, "estimates", "truth")
    estimates = io.read_fit_results(args.estimates)
    truth = io.read_truth(args.truth)
    report = io.evaluate(estimates, truth, tol=args.tol)
    if args.output:
        io.write_accuracy(args.output, report)
        print(f"wrote accuracy report to {args.output}")
    for line in report.summary_lines():
        print(line)
    return 0


_PERIODOGRAM_DEFAULTS = {
    "gamma1": 0.0,
    "gamma2": 0.0,
    "tol_rel": 1e-8,
    "max_rounds": 1000,
}


def cmd_periodogram(args):
    _merge_config(args, _PERIODOGRAM_DEFAULTS)
    _require(args, "input", "star", "output")
    _check_periods(args)
    gamma1 = _parse_gamma(args.gamma1)
    gamma2 = _parse_gamma(args.gamma2)
    if "auto" in (gamma1, gamma2):
        raise ValidationError("periodogram needs numeric gamma values")
    curves = [lc for lc in io.ingest(args.input) if lc.star_id == args.star]
    if not curves:
        raise ValidationError(f"star {args.star!r} not found in the input")
    lc = curves[0]
    grid = _star_grid(lc, args)
    if gamma1 > 0.0 or gamma2 > 0.0:
        settings = BcdSettings(rel_tol=args.tol_rel, max_rounds=args.max_rounds)
        cfg = PenaltyConfig.uniform(lc.n_bands, gamma1, gamma2)
        res = pgls_estimate(lc, grid, cfg, settings, eval_cap=args.eval_cap)
    else:
        res = mgls_estimate(lc, grid)
    io.write_periodogram(args.output, res.profile)
    print(
        f"wrote periodogram for {args.star} to {args.output} "
        f"(best period {res.period:.6g} at objective {res.objective:.6g})"
    )
    return 0


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--config", help="JSON file of options; flags override it")


def _add_period_bounds(p):
    p.add_argument("--period-min", type=float, help="shortest period searched (days)")
    p.add_argument("--period-max", type=float, help="longest period searched (days)")


def _add_grid_controls(p):
    p.add_argument("--grid-spacing", type=float,
                   help="override the span-derived frequency spacing (rad/day)")
    p.add_argument("--max-grid-size", type=int,
                   help="coarsen the grid to at most this many frequencies")


def _add_bcd_controls(p):
    p.add_argument("--tol-rel", type=float, help="descent parameter tolerance")
    p.add_argument("--max-rounds", type=int, help="descent round limit")
    p.add_argument("--eval-cap", type=int,
                   help="max penalized evaluations per star (marks result incomplete)")


def build_parser():
    parser = _Parser(prog="mbperiod", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[], help="fit periods to light curves",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--input", nargs="+", help="observation CSV file(s)")
    p.add_argument("--output", help="fit results CSV")
    p.add_argument("--bands", help="comma-separated band labels to keep")
    p.add_argument("--method", choices=("mgls", "pgls", "both"))
    _add_period_bounds(p)
    _add_grid_controls(p)
    p.add_argument("--gamma1", help="amplitude penalty strength or 'auto'")
    p.add_argument("--gamma2", help="phase penalty strength or 'auto'")
    p.add_argument("--historical",
                   help="well-sampled curves CSV for the reference direction/targets")
    p.add_argument("--tune-size", type=int,
                   help="number of input curves used when tuning is 'auto'")
    _add_bcd_controls(p)
    p.add_argument("--periodogram-dir", help="write per-star periodogram CSVs here")
    p.add_argument("--threads", type=int, help="worker threads over stars")
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("tune", help="select penalty strengths from data")
    p.add_argument("--historical", help="well-sampled curves CSV")
    p.add_argument("--input", nargs="+", help="sparse curves CSV for the tune set")
    p.add_argument("--tune-size", type=int)
    _add_period_bounds(p)
    p.add_argument("--order", choices=("amp_first", "phase_first"))
    _add_bcd_controls(p)
    p.add_argument("--output", help="write the tuning JSON here (default stdout)")
    p.add_argument("--threads", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("simulate", help="generate synthetic light curves")
    p.add_argument("--n-curves", type=int)
    p.add_argument("--n-bands", type=int)
    _add_period_bounds(p)
    p.add_argument("--obs-per-band", type=int)
    p.add_argument("--noise-scale", type=float)
    p.add_argument("--time-span", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", help="observation CSV to write")
    p.add_argument("--truth", help="truth CSV to write")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("downsample", help="thin each band to k points")
    p.add_argument("--input", nargs="+")
    p.add_argument("--output")
    p.add_argument("--per-band", type=int, help="points kept per band")
    p.add_argument("--seed", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_downsample)

    p = sub.add_parser("evaluate", help="score estimates against a truth table")
    p.add_argument("--estimates", help="fit results CSV")
    p.add_argument("--truth", help="truth CSV with star_id,period")
    p.add_argument("--tol", type=float, help="relative period tolerance")
    p.add_argument("--output", help="per-star accuracy CSV")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("periodogram", help="objective along the grid for one star")
    p.add_argument("--input", nargs="+")
    p.add_argument("--star", help="star_id to profile")
    _add_period_bounds(p)
    _add_grid_controls(p)
    p.add_argument("--gamma1", help="amplitude penalty strength")
    p.add_argument("--gamma2", help="phase penalty strength")
    _add_bcd_controls(p)
    p.add_argument("--output", help="periodogram CSV")
    _add_common(p)
    p.set_defaults(func=cmd_periodogram)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
