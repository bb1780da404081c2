"""Curve ingestion and human-readable report rendering.

Tables mirror the familiar constants-table layout: one row per model
label, one column per method, each cell a normalized power law like
`39.95 + (N/8.18e5)^-0.82`. Plots are self-contained SVG files written
without any plotting dependency so that identical inputs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import math
import re
from pathlib import Path
from typing import Sequence

import numpy as np

from .datasets import METHOD_ORDER, Method, ScaleVariable, ScalingCurve
from .errors import ArgumentError, DegenerateLawError, ParseError, ValidationError
from .fitting import FitInfeasible, FitResult, predict_error
from .laws import NormalizedPowerLaw, normalize_law

_HEADER = ("value", "error_percent")

#: Column titles for the standard three methods.
METHOD_TITLES = {
    Method.FINETUNE: "Fine-Tuning",
    Method.MATCHING: "Matching Network",
    Method.PROTOTYPICAL: "Prototypical Network",
}

_PLOT_SAMPLES = 100


def ingest_curve_csv(
    path: str | Path,
    variable: ScaleVariable = ScaleVariable.DATASET_SIZE,
    label: str | None = None,
) -> ScalingCurve:
    """Parse a `value,error_percent` CSV into a sorted ScalingCurve."""
    path = Path(path)
    with open(path, "r", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != _HEADER:
        got = ",".join(rows[0]) if rows else "<empty file>"
        raise ParseError(
            f"{path}: line 1: expected header 'value,error_percent', got '{got}'"
        )
    points: list[tuple[float, float]] = []
    seen: dict[float, int] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise ParseError(
                f"{path}: line {lineno}: expected 2 fields, got {len(row)}"
            )
        try:
            value, error = float(row[0]), float(row[1])
        except ValueError as exc:
            raise ParseError(f"{path}: line {lineno}: {exc}") from exc
        if value in seen:
            raise ValidationError(
                f"{path}: line {lineno}: duplicate value {row[0]} "
                f"(first seen on line {seen[value]})"
            )
        seen[value] = lineno
        points.append((value, error))
    return ScalingCurve.from_points(
        variable, points, label=path.stem if label is None else label
    )


def format_scientific(x: float) -> str:
    """Two-decimal mantissa with a bare exponent, e.g. 8.18e5."""
    if not (x > 0) or not math.isfinite(x):
        raise ArgumentError(f"scientific formatting needs a positive real, got {x}")
    exponent = math.floor(math.log10(x))
    mantissa = x / 10.0**exponent
    # Rounding can push the mantissa to 10.00; roll into the next decade.
    if round(mantissa, 2) >= 10.0:
        mantissa /= 10.0
        exponent += 1
    return f"{mantissa:.2f}e{exponent}"


def render_cell(fit: FitResult | FitInfeasible | None) -> str:
    """One table cell: a normalized law, or an n/a marker with the reason."""
    if fit is None:
        return "n/a (insufficient points)"
    if isinstance(fit, FitInfeasible):
        # The reason's first clause is the short name; detail follows a colon.
        return f"n/a ({fit.reason.split(':', 1)[0] or 'infeasible'})"
    if not fit.converged:
        return "n/a (fit did not converge)"
    try:
        norm = normalize_law(fit.law)
    except DegenerateLawError:
        return "n/a (degenerate constants)"
    sym = norm.variable.symbol
    return (
        f"{norm.err_inf:.2f} + ({sym}/{format_scientific(norm.scale)})"
        f"^{norm.alpha:.2f}"
    )


_CELL_RE = re.compile(
    r"^\s*(\d+(?:\.\d+)?)\s*\+\s*\(([NC])/(\d+(?:\.\d+)?e[+-]?\d+)\)"
    r"\^(-\d+(?:\.\d+)?)\s*$"
)


def parse_table_cell(cell: str) -> NormalizedPowerLaw:
    """Invert render_cell for a proper law cell (raises ParseError on n/a)."""
    m = _CELL_RE.match(cell)
    if m is None:
        raise ParseError(f"not a power-law table cell: '{cell}'")
    variable = (
        ScaleVariable.DATASET_SIZE if m.group(2) == "N" else ScaleVariable.CLASS_COUNT
    )
    return NormalizedPowerLaw(
        err_inf=float(m.group(1)),
        scale=float(m.group(3)),
        alpha=float(m.group(4)),
        variable=variable,
    )


def emit_table(
    fits: Sequence[FitResult | FitInfeasible | None],
    labels: Sequence[str],
    columns: Sequence[str] | None = None,
) -> str:
    """Render fits as a padded text table, row-major over labels x columns.

    With no labels the result is a header-only table.
    """
    if columns is None:
        columns = [f"{METHOD_TITLES[m]} Err(N)" for m in METHOD_ORDER]
    if len(fits) != len(labels) * len(columns):
        raise ArgumentError(
            f"need {len(labels)}x{len(columns)} fits row-major, got {len(fits)}"
        )
    header = ["Model", *columns]
    body = [
        [str(label)]
        + [render_cell(f) for f in fits[i * len(columns) : (i + 1) * len(columns)]]
        for i, label in enumerate(labels)
    ]
    widths = [
        max(len(row[c]) for row in [header, *body]) for c in range(len(header))
    ]
    lines = [
        " | ".join(cell.ljust(w) for cell, w in zip(header, widths)).rstrip(),
        "-|-".join("-" * w for w in widths),
    ]
    for row in body:
        lines.append(" | ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def _log_ticks(lo: float, hi: float) -> list[float]:
    first = math.ceil(math.log10(lo) - 1e-12)
    last = math.floor(math.log10(hi) + 1e-12)
    return [10.0**d for d in range(first, last + 1)]


def _tick_text(value: float) -> str:
    exp = math.log10(value)
    if abs(exp - round(exp)) < 1e-9:
        return f"1e{round(exp)}"
    return f"{value:g}"


def emit_plot(
    curve: ScalingCurve,
    fit: FitResult | FitInfeasible | None,
    path: str | Path,
) -> None:
    """Write a log-log SVG of the curve (and fit) plus a sidecar CSV.

    The fitted series is sampled at 100 log-spaced values across the data
    range; the sidecar CSV at the same path with a .csv suffix holds every
    plotted series row as `series,value,error_percent`.
    """
    path = Path(path)
    xs = np.asarray(curve.values, dtype=np.float64)
    ys = np.asarray(curve.errors, dtype=np.float64)
    if np.any(ys <= 0.0):
        raise ValidationError(
            f"log-log plot needs positive error rates; curve '{curve.label}' has 0"
        )

    fit_xs = fit_ys = None
    if isinstance(fit, FitResult):
        lo, hi = float(xs.min()), float(xs.max())
        if hi <= lo:
            lo, hi = lo / 10.0, hi * 10.0
        fit_xs = np.exp(np.linspace(math.log(lo), math.log(hi), _PLOT_SAMPLES))
        fit_ys = np.array([predict_error(fit.law, float(x)) for x in fit_xs])

    all_x = xs if fit_xs is None else np.concatenate([xs, fit_xs])
    all_y = ys if fit_ys is None else np.concatenate([ys, fit_ys])
    all_y = all_y[all_y > 0.0]
    if all_y.size == 0:
        raise ValidationError("nothing positive to plot on a log axis")

    def padded(arr: np.ndarray) -> tuple[float, float]:
        lo, hi = math.log10(float(arr.min())), math.log10(float(arr.max()))
        if hi - lo < 1e-9:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.05 * (hi - lo)
        return lo - pad, hi + pad

    lx0, lx1 = padded(all_x)
    ly0, ly1 = padded(all_y)

    width, height = 640.0, 480.0
    ml, mr, mt, mb = 70.0, 20.0, 20.0, 50.0
    pw, ph = width - ml - mr, height - mt - mb

    def sx(v: float) -> float:
        return ml + (math.log10(v) - lx0) / (lx1 - lx0) * pw

    def sy(v: float) -> float:
        return mt + (ly1 - math.log10(v)) / (ly1 - ly0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" '
        f'height="{height:g}" viewBox="0 0 {width:g} {height:g}">',
        f'<rect width="{width:g}" height="{height:g}" fill="white"/>',
        # axes
        f'<line x1="{ml:.3f}" y1="{mt + ph:.3f}" x2="{ml + pw:.3f}" '
        f'y2="{mt + ph:.3f}" stroke="black" stroke-width="1"/>',
        f'<line x1="{ml:.3f}" y1="{mt:.3f}" x2="{ml:.3f}" '
        f'y2="{mt + ph:.3f}" stroke="black" stroke-width="1"/>',
    ]
    for tv in _log_ticks(10.0**lx0, 10.0**lx1):
        x = sx(tv)
        parts.append(
            f'<line x1="{x:.3f}" y1="{mt + ph:.3f}" x2="{x:.3f}" '
            f'y2="{mt + ph + 5:.3f}" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x:.3f}" y="{mt + ph + 18:.3f}" font-size="11" '
            f'text-anchor="middle" font-family="sans-serif">{_tick_text(tv)}</text>'
        )
    for tv in _log_ticks(10.0**ly0, 10.0**ly1):
        y = sy(tv)
        parts.append(
            f'<line x1="{ml - 5:.3f}" y1="{y:.3f}" x2="{ml:.3f}" '
            f'y2="{y:.3f}" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{ml - 8:.3f}" y="{y + 4:.3f}" font-size="11" '
            f'text-anchor="end" font-family="sans-serif">{_tick_text(tv)}</text>'
        )
    sym = curve.variable.symbol
    parts.append(
        f'<text x="{ml + pw / 2:.3f}" y="{height - 10:.3f}" font-size="12" '
        f'text-anchor="middle" font-family="sans-serif">{sym} (log scale)</text>'
    )
    parts.append(
        f'<text x="15" y="{mt + ph / 2:.3f}" font-size="12" text-anchor="middle" '
        f'font-family="sans-serif" transform="rotate(-90 15 {mt + ph / 2:.3f})">'
        "error % (log scale)</text>"
    )
    if fit_xs is not None and fit_ys is not None:
        d = " ".join(
            f"{'M' if i == 0 else 'L'} {sx(float(x)):.3f} {sy(float(y)):.3f}"
            for i, (x, y) in enumerate(zip(fit_xs, fit_ys))
        )
        parts.append(
            f'<path d="{d}" fill="none" stroke="#c44" stroke-width="1.5"/>'
        )
    for x, y in zip(xs, ys):
        parts.append(
            f'<circle cx="{sx(float(x)):.3f}" cy="{sy(float(y)):.3f}" r="3" '
            'fill="#246"/>'
        )
    if curve.label:
        parts.append(
            f'<text x="{ml + 6:.3f}" y="{mt + 14:.3f}" font-size="12" '
            f'font-family="sans-serif">{curve.label}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")

    sidecar = path.with_suffix(".csv")
    with open(sidecar, "w", newline="\n") as fh:
        fh.write("series,value,error_percent\n")
        for x, y in zip(xs, ys):
            fh.write(f"data,{float(x)!r},{float(y)!r}\n")
        if fit_xs is not None and fit_ys is not None:
            for x, y in zip(fit_xs, fit_ys):
                fh.write(f"fit,{float(x)!r},{float(y)!r}\n")
