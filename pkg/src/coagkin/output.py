"""CSV, JSON and SVG emission.

CSV files carry full double precision (17 significant digits) so reruns
can be compared byte for byte. SVG plots are generated directly as
polylines; they are conveniences for eyeballing runs, the CSVs are the
data of record.
"""
from __future__ import annotations

import os

import numpy as np

from .reports import write_json_atomic


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_trajectory_csv(path: str, traj) -> str:
    k = traj.samples[0].truncation_k
    header = "t," + ",".join(f"xi_{i}" for i in range(1, k + 1))
    lines = [header]
    for s in traj.samples:
        lines.append(",".join([fmt(s.time)] + [fmt(v) for v in s.values]))
    _write_text(path, "\n".join(lines) + "\n")
    return path


def write_diagnostics_csv(path: str, traj) -> str:
    extra_orders = sorted(traj.diagnostics[0].moment_m)
    g_names = sorted(traj.diagnostics[0].g_moments)
    header = ["t", "M0", "M1"]
    header += [f"M{o:g}" for o in extra_orders]
    header += ["tail_fraction", "rhs_sup", "mass_leak_rate"]
    header += [f"g:{n}" for n in g_names]
    lines = [",".join(header)]
    for s, d in zip(traj.samples, traj.diagnostics):
        row = [fmt(s.time), fmt(d.moment_0), fmt(d.moment_1)]
        row += [fmt(d.moment_m[o]) for o in extra_orders]
        row += [fmt(d.tail_mass_fraction), fmt(d.rhs_sup), fmt(d.mass_leak_rate)]
        row += [fmt(d.g_moments[n]) for n in g_names]
        lines.append(",".join(row))
    _write_text(path, "\n".join(lines) + "\n")
    return path


def write_summary_json(path: str, payload: dict) -> str:
    return write_json_atomic(path, payload)


def _write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def write_line_svg(
    path: str,
    x: np.ndarray,
    series: list[tuple[str, np.ndarray]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    logx: bool = False,
    logy: bool = False,
    width: int = 640,
    height: int = 420,
) -> str:
    """Minimal polyline plot. Log axes drop nonpositive points."""
    x = np.asarray(x, dtype=float)
    ml, mr, mt, mb = 70, 20, 34, 48
    pw, ph = width - ml - mr, height - mt - mb

    def tx(v):
        return np.log10(v) if logx else v

    def ty(v):
        return np.log10(v) if logy else v

    xs_all, ys_all = [], []
    clean = []
    for label, ys in series:
        ys = np.asarray(ys, dtype=float)
        mask = np.isfinite(ys) & np.isfinite(x)
        if logy:
            mask &= ys > 0
        if logx:
            mask &= x > 0
        xv, yv = tx(x[mask]), ty(ys[mask])
        clean.append((label, xv, yv))
        xs_all.append(xv)
        ys_all.append(yv)
    xs_all = np.concatenate(xs_all) if xs_all else np.array([0.0, 1.0])
    ys_all = np.concatenate(ys_all) if ys_all else np.array([0.0, 1.0])
    if xs_all.size == 0:
        xs_all = np.array([0.0, 1.0])
    if ys_all.size == 0:
        ys_all = np.array([0.0, 1.0])
    x0, x1 = float(xs_all.min()), float(xs_all.max())
    y0, y1 = float(ys_all.min()), float(ys_all.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    def esc(s):
        return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{esc(title)}</text>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = x0 + frac * (x1 - x0)
        yv = y0 + frac * (y1 - y0)
        xlab = f"1e{xv:.2g}" if logx else f"{xv:.4g}"
        ylab = f"1e{yv:.2g}" if logy else f"{yv:.4g}"
        parts.append(
            f'<line x1="{px(xv):.1f}" y1="{mt + ph}" x2="{px(xv):.1f}" y2="{mt + ph + 5}" stroke="#444"/>'
            f'<text x="{px(xv):.1f}" y="{mt + ph + 18}" text-anchor="middle" font-size="10">{xlab}</text>'
        )
        parts.append(
            f'<line x1="{ml - 5}" y1="{py(yv):.1f}" x2="{ml}" y2="{py(yv):.1f}" stroke="#444"/>'
            f'<text x="{ml - 8}" y="{py(yv):.1f}" text-anchor="end" dominant-baseline="middle" '
            f'font-size="10">{ylab}</text>'
        )
    for n, (label, xv, yv) in enumerate(clean):
        color = _COLORS[n % len(_COLORS)]
        if xv.size:
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xv, yv))
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{ml + 10}" y="{mt + 16 + 14 * n}" font-size="11" fill="{color}">{esc(label)}</text>'
        )
    parts.append(
        f'<text x="{width / 2}" y="{height - 8}" text-anchor="middle" font-size="12">{esc(xlabel)}</text>'
    )
    parts.append(
        f'<text x="16" y="{mt + ph / 2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 16 {mt + ph / 2})">{esc(ylabel)}</text>'
    )
    parts.append("</svg>")
    _write_text(path, "\n".join(parts) + "\n")
    return path
