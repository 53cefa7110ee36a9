"""Standalone SVG figures: mean +/- SD cycle waveforms and Bland-Altman plots.

The SVG is written by hand so output is byte-for-byte deterministic and needs
no plotting library. Every figure embeds its plotted numbers as a CSV table
inside an XML comment, for traceability.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=20, top=40, bottom=50)


def _f(x):
    return f"{x:.6f}"


def _range(values, pad=0.05):
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return -1.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    span = hi - lo
    if span == 0:
        span = max(abs(lo), 1.0)
    return lo - pad * span, hi + pad * span


class _Axes:
    """Maps data coordinates into the SVG plotting box."""

    def __init__(self, xlim, ylim):
        self.xlim, self.ylim = xlim, ylim
        self.x0, self.x1 = MARGIN["left"], WIDTH - MARGIN["right"]
        self.y0, self.y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]

    def x(self, v):
        a, b = self.xlim
        return self.x0 + (v - a) / (b - a) * (self.x1 - self.x0)

    def y(self, v):
        a, b = self.ylim
        return self.y0 + (v - a) / (b - a) * (self.y1 - self.y0)

    def points(self, xs, ys):
        return " ".join(f"{self.x(a):.2f},{self.y(b):.2f}" for a, b in zip(xs, ys))


def _ticks(lo, hi, n=5):
    return np.linspace(lo, hi, n)


def _frame(ax, title, xlabel, ylabel):
    parts = [
        f'<rect x="{ax.x0}" y="{ax.y1}" width="{ax.x1 - ax.x0}" height="{ax.y0 - ax.y1}" '
        'fill="none" stroke="#000000" stroke-width="1"/>',
        f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>',
        f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle" font-size="13">'
        f'{escape(xlabel)}</text>',
        f'<text x="16" y="{HEIGHT / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 16 {HEIGHT / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for t in _ticks(*ax.xlim):
        parts.append(f'<text x="{ax.x(t):.2f}" y="{ax.y0 + 16}" text-anchor="middle" '
                     f'font-size="11">{t:.3g}</text>')
    for t in _ticks(*ax.ylim):
        parts.append(f'<text x="{ax.x0 - 6}" y="{ax.y(t) + 4:.2f}" text-anchor="end" '
                     f'font-size="11">{t:.3g}</text>')
    return parts


def _document(body, columns, rows):
    table = [",".join(columns)] + [",".join(_f(v) for v in row) for row in rows]
    # "--" may not appear inside an XML comment; the table is numeric so it cannot
    data = "\n".join(table).replace("--", "- -")
    return "\n".join([
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<!-- data\n{data}\n-->",
        '<rect width="100%" height="100%" fill="#ffffff"/>',
        *body,
        "</svg>",
        "",
    ])


def waveform_svg(summary, title, ylabel, xlabel="gait cycle (%)"):
    """Mean line with a shaded +/- 1 SD band over 0-100 % of the cycle."""
    mean = np.asarray(summary.mean, dtype=float)
    sd = np.asarray(summary.sd, dtype=float)
    pct = np.linspace(0.0, 100.0, len(mean))
    ax = _Axes((0.0, 100.0), _range(np.concatenate([mean - sd, mean + sd])))
    band = ax.points(np.concatenate([pct, pct[::-1]]),
                     np.concatenate([mean + sd, (mean - sd)[::-1]]))
    body = _frame(ax, f"{title} (n={summary.n_cycles})", xlabel, ylabel)
    body += [
        f'<polygon points="{band}" fill="#9ecae1" fill-opacity="0.6" stroke="none"/>',
        f'<polyline points="{ax.points(pct, mean)}" fill="none" stroke="#08519c" '
        'stroke-width="2"/>',
    ]
    rows = np.column_stack([pct, mean, sd])
    return _document(body, ["percent", "mean", "sd"], rows)


def bland_altman_svg(stats, title, units=""):
    """Differences against pairwise means with bias and dashed +/- 1.96 SD lines."""
    means = np.asarray(stats.means, dtype=float)
    diffs = np.asarray(stats.differences, dtype=float)
    ylim = _range(np.concatenate([diffs, [stats.loa_low, stats.loa_high, stats.bias]]))
    ax = _Axes(_range(means), ylim)
    unit = f" ({units})" if units else ""
    body = _frame(ax, title, f"mean of methods{unit}", f"difference{unit}")
    for x, y in zip(means, diffs):
        body.append(f'<circle cx="{ax.x(x):.2f}" cy="{ax.y(y):.2f}" r="4" fill="#3182bd"/>')
    for value, label, dash in ((stats.bias, "bias", ""),
                               (stats.loa_high, "+1.96 SD", ' stroke-dasharray="6,4"'),
                               (stats.loa_low, "-1.96 SD", ' stroke-dasharray="6,4"')):
        y = ax.y(value)
        body.append(f'<line x1="{ax.x0}" y1="{y:.2f}" x2="{ax.x1}" y2="{y:.2f}" '
                    f'stroke="#de2d26" stroke-width="1.5"{dash}/>')
        body.append(f'<text x="{ax.x1 - 4}" y="{y - 4:.2f}" text-anchor="end" font-size="11">'
                    f'{escape(label)} {value:.3g}</text>')
    rows = np.column_stack([means, diffs])
    return _document(body, ["mean", "difference"], rows)
