"""Bland-Altman chart written as plain SVG text (no plotting library)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

from .stats import AgreementReport

__all__ = ["bland_altman_svg", "nice_ticks"]

WIDTH, HEIGHT = 800, 600
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 80, 150, 50, 70


def nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    if hi <= lo:
        lo, hi = lo - 1.0, hi + 1.0
    raw = (hi - lo) / max(target - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9)
    last = math.floor(hi / step + 1e-9)
    return [round(i * step, 10) for i in range(first, last + 1)]


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _label(v: float) -> str:
    s = f"{v:.6g}"
    return "0" if s == "-0" else s


def bland_altman_svg(report: AgreementReport, title: str = "Bland-Altman") -> str:
    """Differences (reference - predicted) against pair means, with bias and 95% limits."""
    means = report.means
    diffs = report.differences
    x_lo, x_hi = float(means.min()), float(means.max())
    pad_x = max((x_hi - x_lo) * 0.08, 1.0)
    x_lo, x_hi = x_lo - pad_x, x_hi + pad_x
    y_vals = list(diffs) + [report.loa_low_ml, report.loa_high_ml, 0.0]
    y_lo, y_hi = float(min(y_vals)), float(max(y_vals))
    pad_y = max((y_hi - y_lo) * 0.1, 1.0)
    y_lo, y_hi = y_lo - pad_y, y_hi + pad_y

    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x):
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return MARGIN_T + (y_hi - y) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.2f}" y="28" text-anchor="middle" font-size="16">{escape(title)}</text>',
    ]
    x0, y0 = MARGIN_L, MARGIN_T + ph
    out.append(
        f'<g stroke="black" stroke-width="1">'
        f'<line x1="{x0}" y1="{MARGIN_T}" x2="{x0}" y2="{y0}"/>'
        f'<line x1="{x0}" y1="{y0}" x2="{x0 + pw}" y2="{y0}"/></g>'
    )
    for t in nice_ticks(x_lo, x_hi):
        X = _fmt(sx(t))
        out.append(f'<line x1="{X}" y1="{y0}" x2="{X}" y2="{y0 + 5}" stroke="black"/>')
        out.append(f'<text x="{X}" y="{y0 + 20}" text-anchor="middle">{_label(t)}</text>')
    for t in nice_ticks(y_lo, y_hi):
        Y = _fmt(sy(t))
        out.append(f'<line x1="{x0 - 5}" y1="{Y}" x2="{x0}" y2="{Y}" stroke="black"/>')
        out.append(f'<text x="{x0 - 8}" y="{_fmt(sy(t) + 4)}" text-anchor="end">{_label(t)}</text>')
    out.append(
        f'<text x="{_fmt(MARGIN_L + pw / 2)}" y="{HEIGHT - 20}" text-anchor="middle">'
        "Mean of reference and predicted volume (mL)</text>"
    )
    out.append(
        f'<text x="20" y="{_fmt(MARGIN_T + ph / 2)}" text-anchor="middle" '
        f'transform="rotate(-90 20 {_fmt(MARGIN_T + ph / 2)})">'
        "Reference - predicted (mL)</text>"
    )

    lines = (
        ("bias", report.bias_ml, "#1f4e9c", ""),
        ("+1.96 SD", report.loa_high_ml, "#b22222", ' stroke-dasharray="6 4"'),
        ("-1.96 SD", report.loa_low_ml, "#b22222", ' stroke-dasharray="6 4"'),
    )
    for name, v, color, dash in lines:
        Y = _fmt(sy(v))
        out.append(
            f'<line x1="{x0}" y1="{Y}" x2="{x0 + pw}" y2="{Y}" stroke="{color}" '
            f'stroke-width="1.5"{dash}/>'
        )
        out.append(
            f'<text x="{x0 + pw + 6}" y="{_fmt(sy(v) + 4)}" fill="{color}">'
            f"{name}: {v:.2f}</text>"
        )
    for (pid, _, _), m, d in zip(report.pairs, means, diffs):
        out.append(
            f'<circle cx="{_fmt(sx(m))}" cy="{_fmt(sy(d))}" r="4" fill="#333333" '
            f'fill-opacity="0.8"><title>{escape(pid)}</title></circle>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
