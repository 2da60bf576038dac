"""Static SVG line plots: fixed-size canvas, polyline paths, no dependencies.

Output is deliberately plain (one polyline per series, 1-2-5 tick ladder)
so that plot files diff cleanly between runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CANVAS_W = 800
CANVAS_H = 500
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
MAX_POINTS = 1500


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    color: str = ""
    dash: str = ""  # e.g. "6,3" for dashed


@dataclass
class Panel:
    series: list
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""


def _nice_ticks(lo: float, hi: float, target: int = 5):
    if not (math.isfinite(lo) and math.isfinite(hi)):
        lo, hi = 0.0, 1.0
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for m in (1.0, 2.0, 5.0, 10.0):
        if raw <= m * mag:
            step = m * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * span:
        ticks.append(0.0 if abs(t) < 1e-12 * span else t)
        t += step
    return ticks


def _fmt(v: float) -> str:
    if v == 0.0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return f"{v:.4g}"


def _decimate(x: np.ndarray, y: np.ndarray):
    n = x.shape[0]
    if n <= MAX_POINTS:
        return x, y
    stride = int(math.ceil(n / MAX_POINTS))
    idx = np.arange(0, n, stride)
    if idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    return x[idx], y[idx]


def _panel_svg(panel: Panel, ox: float, oy: float, w: float, h: float) -> list:
    ml, mr, mt, mb = 62, 12, 22 if panel.title else 10, 34
    px, py = ox + ml, oy + mt
    pw, ph = w - ml - mr, h - mt - mb
    finite = lambda a: a[np.isfinite(a)]
    xs = np.concatenate([finite(np.asarray(s.x, dtype=float)) for s in panel.series])
    ys = np.concatenate([finite(np.asarray(s.y, dtype=float)) for s in panel.series])
    if xs.size == 0:
        xs = np.array([0.0, 1.0])
    if ys.size == 0:
        ys = np.array([0.0, 1.0])
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(ys.min()), float(ys.max())
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0

    def X(v):
        return px + (v - x_lo) / (x_hi - x_lo) * pw

    def Y(v):
        return py + ph - (v - y_lo) / (y_hi - y_lo) * ph

    out = [
        f'<rect x="{px:.1f}" y="{py:.1f}" width="{pw:.1f}" height="{ph:.1f}" '
        'fill="white" stroke="#444" stroke-width="1"/>'
    ]
    if panel.title:
        out.append(
            f'<text x="{px + pw / 2:.1f}" y="{oy + 15:.1f}" text-anchor="middle" '
            f'font-size="13" font-family="sans-serif">{panel.title}</text>'
        )
    for t in _nice_ticks(x_lo, x_hi):
        out.append(
            f'<line x1="{X(t):.1f}" y1="{py + ph:.1f}" x2="{X(t):.1f}" '
            f'y2="{py + ph + 4:.1f}" stroke="#444"/>'
        )
        out.append(
            f'<text x="{X(t):.1f}" y="{py + ph + 16:.1f}" text-anchor="middle" '
            f'font-size="10" font-family="sans-serif">{_fmt(t)}</text>'
        )
    for t in _nice_ticks(y_lo, y_hi):
        out.append(
            f'<line x1="{px - 4:.1f}" y1="{Y(t):.1f}" x2="{px:.1f}" y2="{Y(t):.1f}" stroke="#444"/>'
        )
        out.append(
            f'<text x="{px - 7:.1f}" y="{Y(t) + 3.5:.1f}" text-anchor="end" '
            f'font-size="10" font-family="sans-serif">{_fmt(t)}</text>'
        )
        out.append(
            f'<line x1="{px:.1f}" y1="{Y(t):.1f}" x2="{px + pw:.1f}" y2="{Y(t):.1f}" '
            'stroke="#ddd" stroke-width="0.5"/>'
        )
    if panel.xlabel:
        out.append(
            f'<text x="{px + pw / 2:.1f}" y="{py + ph + 30:.1f}" text-anchor="middle" '
            f'font-size="11" font-family="sans-serif">{panel.xlabel}</text>'
        )
    if panel.ylabel:
        out.append(
            f'<text x="{ox + 14:.1f}" y="{py + ph / 2:.1f}" text-anchor="middle" '
            f'font-size="11" font-family="sans-serif" '
            f'transform="rotate(-90 {ox + 14:.1f} {py + ph / 2:.1f})">{panel.ylabel}</text>'
        )
    legend_y = py + 12
    for i, s in enumerate(panel.series):
        color = s.color or PALETTE[i % len(PALETTE)]
        x, y = _decimate(np.asarray(s.x, dtype=float), np.asarray(s.y, dtype=float))
        good = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(x[good], y[good]))
        dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
        out.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2"{dash}/>'
        )
        if s.label:
            lx = px + pw - 8
            out.append(
                f'<line x1="{lx - 26:.1f}" y1="{legend_y:.1f}" x2="{lx - 8:.1f}" '
                f'y2="{legend_y:.1f}" stroke="{color}" stroke-width="1.5"{dash}/>'
            )
            out.append(
                f'<text x="{lx - 30:.1f}" y="{legend_y + 3.5:.1f}" text-anchor="end" '
                f'font-size="10" font-family="sans-serif">{s.label}</text>'
            )
            legend_y += 13
    return out


def write_svg(path, panels, rows: int = 1, cols: int = 1) -> None:
    """Render panels in a rows x cols grid on the fixed 800x500 canvas."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS_W}" '
        f'height="{CANVAS_H}" viewBox="0 0 {CANVAS_W} {CANVAS_H}">',
        f'<rect width="{CANVAS_W}" height="{CANVAS_H}" fill="white"/>',
    ]
    pw = CANVAS_W / cols
    ph = CANVAS_H / rows
    for idx, panel in enumerate(panels):
        r, c = divmod(idx, cols)
        parts.extend(_panel_svg(panel, c * pw, r * ph, pw, ph))
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def tracking_figure(path, log) -> None:
    """Position tracking panel: q2 against its reference."""
    panel = Panel(
        series=[
            Series(log.t, log.q2_ref, label="reference", color="#444", dash="6,3"),
            Series(log.t, log.x[:, 2], label="q2", color=PALETTE[0]),
            Series(log.t, log.x[:, 2] - log.q2_ref, label="error", color=PALETTE[1]),
        ],
        title="load position tracking",
        xlabel="t [s]",
        ylabel="q2 [m]",
    )
    write_svg(path, [panel])


def disturbance_figure(path, log) -> None:
    """True vs estimated disturbances and derivatives, one panel per order."""
    d_true = log.d_true
    panels = []
    truth = d_true
    names = ("d1 (matched)", "d2 (mismatched)")
    orders = min(log.k, 2) + 1
    for order in range(orders):
        if order > 0:
            truth = np.gradient(truth, log.t, axis=0)
        est = log.d_hat(order)
        for c in range(2):
            suffix = "" if order == 0 else f" d^{order}/dt^{order}"
            panels.append(
                Panel(
                    series=[
                        Series(log.t, truth[:, c], label="true", color="#444", dash="5,3"),
                        Series(log.t, est[:, c], label="estimate", color=PALETTE[c]),
                    ],
                    title=names[c] + suffix,
                    xlabel="t [s]" if order == orders - 1 else "",
                    ylabel="N" + ("" if order == 0 else f"/s^{order}"),
                )
            )
    write_svg(path, panels, rows=orders, cols=2)
