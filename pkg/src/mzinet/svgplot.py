"""Minimal static SVG 1.1 line charts."""

import math
from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=72, right=24, top=36, bottom=56)


def _nice_ticks(lo, hi, count=6):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(count - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def line_chart(x, series, xlabel, ylabel, title="", labels=None, log_y=False,
               markers=None, y_range=None):
    """SVG document with one polyline per entry of ``series``.

    ``markers`` is an optional list of (x, y) arrays drawn as open circles,
    e.g. target values.
    """
    x = np.asarray(x, dtype=float)
    series = [np.asarray(s, dtype=float) for s in series]
    labels = labels or [f"series {i + 1}" for i in range(len(series))]
    markers = markers or []

    def ty(v):
        v = np.asarray(v, dtype=float)
        if log_y:
            return np.log10(np.maximum(v, 1e-300))
        return v

    all_y = np.concatenate([ty(s) for s in series] + [ty(m[1]) for m in markers]) if series else np.zeros(1)
    all_y = all_y[np.isfinite(all_y)]
    if y_range is not None:
        y0, y1 = ty(y_range)
    elif log_y:
        y0, y1 = math.floor(all_y.min()), math.ceil(all_y.max())
    else:
        y0, y1 = float(all_y.min()), float(all_y.max())
    y0, y1 = float(y0), float(y1)
    if y1 <= y0:
        y1 = y0 + 1.0
    x0, x1 = float(x.min()), float(x.max())
    if x1 <= x0:
        x1 = x0 + 1.0

    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def py(v):
        return MARGIN["top"] + (1 - (v - y0) / (y1 - y0)) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="15" '
                   f'font-family="sans-serif">{escape(title)}</text>')
    left, bottom = MARGIN["left"], MARGIN["top"] + ph
    out.append(f'<rect x="{left}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
               'fill="none" stroke="black"/>')

    for t in _nice_ticks(x0, x1):
        if x0 - 1e-9 <= t <= x1 + 1e-9:
            X = px(t)
            out.append(f'<line x1="{X:.2f}" y1="{bottom}" x2="{X:.2f}" y2="{bottom + 5}" stroke="black"/>')
            out.append(f'<text x="{X:.2f}" y="{bottom + 19}" text-anchor="middle" font-size="11" '
                       f'font-family="sans-serif">{t:g}</text>')
    yticks = range(int(y0), int(y1) + 1) if log_y else _nice_ticks(y0, y1)
    for t in yticks:
        if y0 - 1e-9 <= t <= y1 + 1e-9:
            Y = py(t)
            text = f"1e{int(t)}" if log_y else f"{t:g}"
            out.append(f'<line x1="{left - 5}" y1="{Y:.2f}" x2="{left}" y2="{Y:.2f}" stroke="black"/>')
            out.append(f'<text x="{left - 8}" y="{Y + 4:.2f}" text-anchor="end" font-size="11" '
                       f'font-family="sans-serif">{text}</text>')

    out.append(f'<text class="xlabel" x="{left + pw / 2}" y="{HEIGHT - 14}" text-anchor="middle" '
               f'font-size="13" font-family="sans-serif">{escape(xlabel)}</text>')
    cy = MARGIN["top"] + ph / 2
    out.append(f'<text class="ylabel" x="18" y="{cy}" text-anchor="middle" font-size="13" '
               f'font-family="sans-serif" transform="rotate(-90 18 {cy})">{escape(ylabel)}</text>')

    for i, (s, name) in enumerate(zip(series, labels)):
        color = COLORS[i % len(COLORS)]
        ys = ty(s)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, ys) if np.isfinite(b))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{pts}">'
                   f'<title>{escape(name)}</title></polyline>')
        ly = MARGIN["top"] + 14 + 16 * i
        lx = left + pw - 120
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}" font-size="11" font-family="sans-serif">'
                   f'{escape(name)}</text>')
    for i, (mx, my) in enumerate(markers):
        color = COLORS[i % len(COLORS)]
        for a, b in zip(np.asarray(mx, dtype=float), ty(my)):
            out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="none" stroke="{color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def spectrum_chart(wavelengths_nm, spectrum, targets=None, title="Transmission"):
    spectrum = np.asarray(spectrum)
    series = [spectrum[:, k] for k in range(spectrum.shape[1])]
    labels = [f"output {k + 1}" for k in range(spectrum.shape[1])]
    markers = None
    if targets is not None:
        targets = np.asarray(targets)
        markers = [(wavelengths_nm, targets[:, k]) for k in range(targets.shape[1])]
    return line_chart(wavelengths_nm, series, "wavelength (nm)", "transmission", title,
                      labels, markers=markers, y_range=(0.0, 1.0))


def trace_chart(values, title="Objective"):
    values = np.asarray(values, dtype=float)
    return line_chart(np.arange(values.size), [values], "iteration", "J (log scale)", title,
                      ["J"], log_y=True)
