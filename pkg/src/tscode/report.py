"""Machine-readable reports and deterministic SVG charts.

Reports are line-oriented ``key value`` text with a versioned header, so
repeated runs with the same configuration are byte-identical. The SVG writer
embeds no timestamps for the same reason.
"""

from __future__ import annotations

import math

HEADER = "tscode-report 1"


def render_report(command: str, fields) -> str:
    lines = [HEADER, f"command {command}"]
    for key, value in fields:
        lines.append(f"{key} {value}")
    return "\n".join(lines) + "\n"


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def render_fit_svg(points, slope: float, intercept: float, title: str) -> str:
    """Scatter of (log2 n, y) with the fitted line and slope annotation."""
    xs = [math.log2(n) for n, _, _ in points]
    ys = [y for _, _, y in points]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    fit_ends = [slope * x + intercept for x in (x_lo, x_hi)]
    y_lo, y_hi = min([y_lo] + fit_ends), max([y_hi] + fit_ends)
    if y_hi - y_lo < 1e-9:
        y_hi = y_lo + 1.0
    width, height, margin = 640, 420, 56

    def sx(x):
        return margin + (x - x_lo) / max(x_hi - x_lo, 1e-9) * (width - 2 * margin)

    def sy(y):
        return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="monospace" font-size="14">{title}</text>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" '
        f'stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 16}" text-anchor="middle" '
        f'font-family="monospace" font-size="12">log2 n</text>',
        f'<text x="16" y="{height / 2:.1f}" text-anchor="middle" '
        f'font-family="monospace" font-size="12" '
        f'transform="rotate(-90 16 {height / 2:.1f})">excess bits</text>',
        f'<line x1="{sx(x_lo):.2f}" y1="{sy(fit_ends[0]):.2f}" '
        f'x2="{sx(x_hi):.2f}" y2="{sy(fit_ends[1]):.2f}" '
        f'stroke="#c02020" stroke-width="1.5"/>',
    ]
    for (n, _, _), x, y in zip(points, xs, ys):
        parts.append(
            f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="4" fill="#204080"/>'
        )
        parts.append(
            f'<text x="{sx(x):.2f}" y="{sy(y) - 8:.2f}" text-anchor="middle" '
            f'font-family="monospace" font-size="10">n={n}</text>'
        )
    parts.append(
        f'<text x="{width - margin}" y="{margin - 8}" text-anchor="end" '
        f'font-family="monospace" font-size="13">slope {_fmt(slope)}  '
        f'intercept {_fmt(intercept)}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
