"""CSV ingestion and serialization.

Observation files carry one row per (star, band, epoch) under the exact
header star_id,band,time,mag,sigma. Floats are written with 17 significant
digits so a write/read cycle reproduces every value bit for bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import BandSeries, MultibandLightCurve

OBS_HEADER = ["star_id", "band", "time", "mag", "sigma"]
FIT_FIXED_COLUMNS = [
    "star_id",
    "method",
    "period",
    "omega",
    "objective",
    "converged",
    "pnll_evals",
]


def fmt(x):
    """Serialize one float with 17 significant digits."""
    return format(float(x), ".17g")


def _parse_float(text, path, line, column):
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(
            f"{path}:{line}: cannot parse {column} value {text!r}"
        ) from None
    if not math.isfinite(value):
        raise ValidationError(f"{path}:{line}: non-finite {column} value {text!r}")
    return value


def _read_rows(path):
    rows = []
    try:
        fh = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if [h.strip() for h in header] != OBS_HEADER:
            raise ValidationError(
                f"{path}:1: expected header {','.join(OBS_HEADER)!r}, "
                f"got {','.join(header)!r}"
            )
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            line = reader.line_num
            if len(row) != 5:
                raise ValidationError(f"{path}:{line}: expected 5 fields, got {len(row)}")
            star_id, band = row[0].strip(), row[1].strip()
            if not star_id or not band:
                raise ValidationError(f"{path}:{line}: empty star_id or band")
            time = _parse_float(row[2], path, line, "time")
            mag = _parse_float(row[3], path, line, "mag")
            sigma = _parse_float(row[4], path, line, "sigma")
            if sigma <= 0.0:
                raise ValidationError(f"{path}:{line}: sigma must be > 0 (got {row[4]})")
            rows.append((star_id, band, time, mag, sigma))
    return rows


def ingest(paths):
    """Read observation CSVs into light curves.

    Accepts one path or an iterable of paths; rows from later files append
    to the same stars. Stars and bands keep first-appearance order.
    """
    if isinstance(paths, (str, bytes)) or hasattr(paths, "__fspath__"):
        paths = [paths]
    rows = []
    for path in paths:
        rows.extend(_read_rows(path))
    if not rows:
        raise ValidationError("no observation rows found")
    stars = {}
    for star_id, band, time, mag, sigma in rows:
        bands = stars.setdefault(star_id, {})
        cols = bands.setdefault(band, ([], [], []))
        cols[0].append(time)
        cols[1].append(mag)
        cols[2].append(sigma)
    curves = []
    for star_id, bands in stars.items():
        series = tuple(
            BandSeries(label, np.array(t), np.array(m), np.array(s))
            for label, (t, m, s) in bands.items()
        )
        curves.append(MultibandLightCurve(star_id, series))
    return curves


def write_lightcurves(path, curves):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(OBS_HEADER)
        for lc in curves:
            for band in lc.bands:
                for t, m, s in zip(band.time, band.mag, band.sigma):
                    writer.writerow([lc.star_id, band.label, fmt(t), fmt(m), fmt(s)])


# ---------------------------------------------------------------------------
# fit results
# ---------------------------------------------------------------------------


def fit_header(band_labels):
    cols = list(FIT_FIXED_COLUMNS)
    for kind in ("beta0", "amp", "rho"):
        cols.extend(f"{kind}_{label}" for label in band_labels)
    return cols


def write_fit_results(path, results, failures=()):
    """Write fit rows; per-band columns cover the union of band labels.

    failures is an iterable of (star_id, method, message); failed stars get
    a row with empty value fields so the output still accounts for every
    input star.
    """
    results = list(results)
    labels = []
    for res in results:
        for label in res.band_labels:
            if label not in labels:
                labels.append(label)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(fit_header(labels))
        for res in results:
            by_label = {
                label: (
                    (res.params.beta0[b], res.params.amp[b], res.params.rho[b])
                    if res.band_ok[b]
                    else None
                )
                for b, label in enumerate(res.band_labels)
            }
            row = [
                res.star_id,
                res.method,
                fmt(res.period),
                fmt(res.omega),
                fmt(res.objective),
                "true" if res.converged else "false",
                str(res.n_pnll_evals),
            ]
            for kind in range(3):
                for label in labels:
                    entry = by_label.get(label)
                    row.append(fmt(entry[kind]) if entry is not None else "")
            writer.writerow(row)
        for star_id, method, _message in failures:
            writer.writerow(
                [star_id, method] + [""] * (len(FIT_FIXED_COLUMNS) - 2 + 3 * len(labels))
            )


def read_fit_results(path):
    """Fit rows back as dicts with parsed period/objective/pnll_evals.

    Rows written for failed stars have period None.
    """
    out = []
    try:
        fh = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.DictReader(fh)
        required = {"star_id", "method", "period"}
        missing = required - set(reader.fieldnames or ())
        if missing:
            raise ValidationError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            line = reader.line_num
            period = row["period"].strip() if row["period"] else ""
            evals = (row.get("pnll_evals") or "").strip()
            out.append(
                {
                    "star_id": row["star_id"],
                    "method": row["method"],
                    "period": _parse_float(period, path, line, "period") if period else None,
                    "pnll_evals": int(evals) if evals else None,
                }
            )
    return out


# ---------------------------------------------------------------------------
# periodograms, truth tables, accuracy reports
# ---------------------------------------------------------------------------


def write_periodogram(path, profile):
    """omega,nll rows; adds an f column when penalized values are present.

    f is only known at frequencies the pruned search evaluated; elsewhere
    the field is left empty.
    """
    has_pnll = profile.pnll is not None
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["omega", "nll", "f"] if has_pnll else ["omega", "nll"])
        for g in range(profile.omegas.size):
            row = [fmt(profile.omegas[g]), fmt(profile.nll[g])]
            if has_pnll:
                value = profile.pnll[g]
                row.append("" if np.isnan(value) else fmt(value))
            writer.writerow(row)


def write_truth(path, truths):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["star_id", "period", "omega"])
        for rec in truths:
            writer.writerow([rec.star_id, fmt(rec.period), fmt(rec.params.omega)])


def read_truth(path):
    """{star_id: period} from a CSV with star_id and period columns."""
    out = {}
    try:
        fh = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"star_id", "period"} <= set(reader.fieldnames):
            raise ValidationError(f"{path}: need star_id and period columns")
        for row in reader:
            line = reader.line_num
            period = _parse_float(row["period"], path, line, "period")
            if period <= 0.0:
                raise ValidationError(f"{path}:{line}: period must be > 0")
            out[row["star_id"]] = period
    if not out:
        raise ValidationError(f"{path}: no truth rows")
    return out


@dataclass(frozen=True)
class AccuracyRow:
    star_id: str
    method: str
    true_period: float
    est_period: float | None
    rel_err: float | None
    within: bool
    pnll_evals: int | None


@dataclass(frozen=True)
class AccuracyReport:
    """Per-star accuracy rows plus the per-method within-tolerance rates.

    A star counts as correct when |est - true| / true <= tol. Stars whose
    estimates are missing (failed rows) count as incorrect; estimates
    without a truth entry are tallied in n_unmatched.
    """

    tol: float
    rows: tuple
    fraction_within: dict
    n_unmatched: int

    def summary_lines(self):
        lines = []
        for method in sorted(self.fraction_within):
            frac = self.fraction_within[method]
            n = sum(1 for r in self.rows if r.method == method)
            hits = sum(1 for r in self.rows if r.method == method and r.within)
            lines.append(
                f"{method}: {hits}/{n} within {self.tol:.1%} ({frac:.3f})"
            )
        if self.n_unmatched:
            lines.append(f"unmatched estimates: {self.n_unmatched}")
        return lines


def evaluate(estimates, truth, tol=0.01):
    """Compare estimate rows (as from read_fit_results) against the truth."""
    if tol <= 0.0:
        raise ValidationError("tol must be > 0")
    rows = []
    unmatched = 0
    for est in estimates:
        true_period = truth.get(est["star_id"])
        if true_period is None:
            unmatched += 1
            continue
        period = est["period"]
        if period is None:
            rows.append(
                AccuracyRow(est["star_id"], est["method"], true_period, None, None, False,
                            est.get("pnll_evals"))
            )
            continue
        rel = abs(period - true_period) / true_period
        rows.append(
            AccuracyRow(
                est["star_id"],
                est["method"],
                true_period,
                period,
                rel,
                rel <= tol,
                est.get("pnll_evals"),
            )
        )
    if not rows:
        raise ValidationError("no estimates matched the truth table")
    methods = sorted({r.method for r in rows})
    fraction = {}
    for method in methods:
        mine = [r for r in rows if r.method == method]
        fraction[method] = sum(r.within for r in mine) / len(mine)
    return AccuracyReport(tol=tol, rows=tuple(rows), fraction_within=fraction,
                          n_unmatched=unmatched)


def write_accuracy(path, report):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["star_id", "method", "true_period", "est_period", "rel_err", "within",
             "pnll_evals"]
        )
        for r in report.rows:
            writer.writerow(
                [
                    r.star_id,
                    r.method,
                    fmt(r.true_period),
                    fmt(r.est_period) if r.est_period is not None else "",
                    fmt(r.rel_err) if r.rel_err is not None else "",
                    "true" if r.within else "false",
                    str(r.pnll_evals) if r.pnll_evals is not None else "",
                ]
            )
