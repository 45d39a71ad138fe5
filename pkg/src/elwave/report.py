"""Report bundles: summary tables, plot-ready series, static SVG charts.

All output is deterministic: repeated generation from the same records is
byte-identical.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .diagnostics import DiagnosticsFrame
from .harness import FitError, RunRecord, decay_window, fit_decay, save_record

TRACKED = ("linf_v", "linf_grad_v", "linf_grad2_v", "linf_dtv", "nullform_ratio")


def emit_report(records: list[RunRecord], out_dir: str) -> list[str]:
    """Write one directory per run plus a cross-run summary; returns paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    summary_rows = []
    for i, rec in enumerate(records):
        run_dir = os.path.join(out_dir, f"run_{i:03d}")
        save_record(rec, run_dir)
        written.append(run_dir)
        row = {
            "run": f"run_{i:03d}",
            "family": rec.config.family,
            "epsilon": rec.config.epsilon,
            "mu": rec.config.mu,
            "status": rec.status,
            "t_final": rec.t_final,
        }
        window = decay_window(rec, (rec.frames[0].t + 1.0, rec.t_final))
        energy_cols = [f"E_d_{rec.config.kappa_max + 1}", f"E_v_{rec.config.kappa_max}"]
        for column in TRACKED + tuple(energy_cols):
            ts, vals = rec.series(column)
            try:
                fit = fit_decay(ts, vals, window)
                row[f"slope_{column}"] = fit.exponent
            except (FitError, ValueError):
                row[f"slope_{column}"] = math.nan
            path = _plot_series(run_dir, column, ts, vals, window)
            if path:
                written.append(path)
        summary_rows.append(row)

    summary_path = os.path.join(out_dir, "summary.csv")
    _write_table(summary_path, summary_rows)
    written.append(summary_path)
    return written


def _write_table(path: str, rows: list[dict]) -> None:
    if not rows:
        with open(path, "w") as fh:
            fh.write("run\n")
        return
    cols: list[str] = []
    for row in rows:
        for key in row:
            if key not in cols:
                cols.append(key)
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(_tok(row.get(c, "")) for c in cols) + "\n")


def _tok(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _plot_series(run_dir: str, column: str, ts, vals, window) -> str | None:
    """Log-log data file plus a fitted line and an SVG rendering."""
    ts = np.asarray(ts)
    vals = np.asarray(vals)
    keep = vals > 0
    if keep.sum() < 2:
        return None
    lx = np.log10(np.sqrt(1.0 + ts[keep] ** 2))
    ly = np.log10(vals[keep])
    try:
        fit = fit_decay(ts, vals, window)
        # natural-log fit replotted in base 10
        fit_line = fit.exponent * lx + fit.intercept / np.log(10)
        slope = fit.exponent
    except (FitError, ValueError):
        fit_line = None
        slope = math.nan

    data_path = os.path.join(run_dir, f"plot_{column}.csv")
    with open(data_path, "w") as fh:
        if fit_line is None:
            fh.write("log10_bracket_t,log10_value\n")
            for a, b in zip(lx, ly):
                fh.write(f"{a!r},{b!r}\n")
        else:
            fh.write("log10_bracket_t,log10_value,log10_fit\n")
            for a, b, c in zip(lx, ly, fit_line):
                fh.write(f"{a!r},{b!r},{c!r}\n")

    svg_path = os.path.join(run_dir, f"plot_{column}.svg")
    curves = [(lx, ly, "#1f6fb2")]
    if fit_line is not None:
        curves.append((lx, fit_line, "#c23b22"))
    title = f"{column} (slope {slope:.3f})" if not math.isnan(slope) else column
    write_svg_lines(svg_path, curves, title=title, xlabel="log10 <t>", ylabel=f"log10 {column}")
    return data_path


def write_svg_lines(path, curves, title="", xlabel="", ylabel="", size=(480, 360)) -> None:
    """Minimal deterministic polyline chart (no external plotting deps)."""
    width, height = size
    pad = 50.0
    xs = np.concatenate([np.asarray(c[0], dtype=float) for c in curves])
    ys = np.concatenate([np.asarray(c[1], dtype=float) for c in curves])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 - x0 < 1e-12:
        x1 = x0 + 1.0
    if y1 - y0 < 1e-12:
        y1 = y0 + 1.0

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect x="0" y="0" width="{width:.0f}" height="{height:.0f}" fill="white"/>',
        f'<rect x="{pad:.1f}" y="{pad:.1f}" width="{width - 2 * pad:.1f}" '
        f'height="{height - 2 * pad:.1f}" fill="none" stroke="#888" stroke-width="1"/>',
    ]
    for cx, cy, color in curves:
        pts = " ".join(f"{sx(float(a)):.2f},{sy(float(b)):.2f}" for a, b in zip(cx, cy))
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="20" font-size="13" text-anchor="middle" '
            f'font-family="monospace">{title}</text>'
        )
    if xlabel:
        parts.append(
            f'<text x="{width / 2:.1f}" y="{height - 12:.1f}" font-size="11" '
            f'text-anchor="middle" font-family="monospace">{xlabel}</text>'
        )
    if ylabel:
        parts.append(
            f'<text x="14" y="{height / 2:.1f}" font-size="11" text-anchor="middle" '
            f'font-family="monospace" transform="rotate(-90 14 {height / 2:.1f})">{ylabel}</text>'
        )
    ticks = [
        (x0, y0),
        (x1, y1),
    ]
    for tx, _ in ticks:
        parts.append(
            f'<text x="{sx(tx):.1f}" y="{height - pad + 16:.1f}" font-size="10" '
            f'text-anchor="middle" font-family="monospace">{tx:.2f}</text>'
        )
    for _, ty in ticks:
        parts.append(
            f'<text x="{pad - 6:.1f}" y="{sy(ty) + 3:.1f}" font-size="10" '
            f'text-anchor="end" font-family="monospace">{ty:.2f}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
