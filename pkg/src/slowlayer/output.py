"""CSV writing and minimal SVG line plots (no plotting dependency)."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def write_csv(path, columns: Sequence[str], rows: Iterable, config_hash=None, meta=None):
    """One ``#`` comment line (config hash plus ``meta``), the header, then the rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    parts = []
    if config_hash is not None:
        parts.append(f"config_sha256={config_hash}")
    for k, v in (meta or {}).items():
        parts.append(f"{k}={_fmt(v)}")
    with open(path, "w", newline="\n") as fh:
        fh.write("# " + " ".join(parts) + "\n")
        fh.write(",".join(columns) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(v) for v in r) + "\n")
    return path


def read_csv(path):
    """Inverse of :func:`write_csv`: ``(meta_line, columns, float array or list rows)``."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    meta = lines[0][2:] if lines and lines[0].startswith("#") else ""
    body = lines[1:] if meta else lines
    cols = body[0].split(",")
    rows = [ln.split(",") for ln in body[1:] if ln]
    try:
        data = np.array(rows, dtype=float) if rows else np.empty((0, len(cols)))
    except ValueError:
        data = rows
    return meta, cols, data


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-12 * step:
        out.append(t)
        t += step
    return out


def svg_plot(path, series, xlabel="", ylabel="", title="", logy=False, width=640, height=420):
    """``series`` is a list of ``(label, x, y)``; non-finite points are dropped."""
    ml, mr, mt, mb = 70, 20, 30, 50
    pts = []
    for label, x, y in series:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if logy:
            with np.errstate(divide="ignore", invalid="ignore"):
                y = np.log10(np.abs(y))
        ok = np.isfinite(x) & np.isfinite(y)
        pts.append((label, x[ok], y[ok]))
    allx = np.concatenate([p[1] for p in pts]) if pts else np.array([0.0, 1.0])
    ally = np.concatenate([p[2] for p in pts]) if pts else np.array([0.0, 1.0])
    if allx.size == 0:
        allx, ally = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.04 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    W, H = width - ml - mr, height - mt - mb
    sx = lambda v: ml + (v - x0) / (x1 - x0) * W
    sy = lambda v: mt + (1.0 - (v - y0) / (y1 - y0)) * H
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{W}" height="{H}" fill="none" stroke="black"/>']
    for t in _ticks(x0, x1):
        X = sx(t)
        out.append(f'<line x1="{X:.2f}" y1="{mt + H}" x2="{X:.2f}" y2="{mt + H + 4}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{mt + H + 16}" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(y0, y1):
        Y = sy(t)
        lab = f"1e{t:.3g}" if logy else f"{t:.4g}"
        out.append(f'<line x1="{ml - 4}" y1="{Y:.2f}" x2="{ml}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 6}" y="{Y + 4:.2f}" text-anchor="end">{lab}</text>')
    for i, (label, x, y) in enumerate(pts):
        c = _COLORS[i % len(_COLORS)]
        if x.size:
            coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
            out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{coords}"/>')
        out.append(f'<text x="{ml + W - 6}" y="{mt + 14 + 14 * i}" text-anchor="end" fill="{c}">'
                   f'{_esc(label)}</text>')
    out.append(f'<text x="{ml + W / 2}" y="{height - 12}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="14" y="{mt + H / 2}" text-anchor="middle" '
               f'transform="rotate(-90 14 {mt + H / 2})">{_esc(ylabel)}</text>')
    out.append(f'<text x="{ml + W / 2}" y="18" text-anchor="middle">{_esc(title)}</text>')
    out.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(out) + "\n")
    return path


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
