"""Self-contained SVG charts: predicted-vs-actual scatter and an importance bar chart.

Output is plain text with fixed number formatting so identical inputs give
byte-identical files.
"""

from __future__ import annotations

from xml.sax.saxutils import escape, quoteattr

POSITIVE = "#3b6ea5"
NEGATIVE = "#c0504d"


def _f(v):
    return f"{v:.3f}"


def _header(width, height, title):
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f"<title>{escape(title)}</title>",
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]


def _nice_ticks(lo, hi, count=5):
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def scatter_svg(pairs, title="Predicted vs actual", label="cake moisture", size=480, margin=60):
    """Square scatter of (actual, predicted) with the y = x reference line.

    Both axes share one scale, so the reference line is the only ``<line>``
    element and runs from the smallest to the largest plotted value.
    """
    pairs = [(float(a), float(p)) for a, p in pairs]
    values = [v for pair in pairs for v in pair]
    lo, hi = min(values), max(values)
    if hi == lo:
        pad = abs(lo) * 0.5 or 1.0
        lo, hi = lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    view_lo, view_hi = lo - pad, hi + pad
    plot = size - 2 * margin

    def px(v):
        return margin + (v - view_lo) / (view_hi - view_lo) * plot

    def py(v):
        return margin + plot - (v - view_lo) / (view_hi - view_lo) * plot

    out = _header(size, size, title)
    x0, x1 = margin, margin + plot
    out.append(
        f'<path class="frame" d="M{_f(x0)},{_f(x0)} L{_f(x0)},{_f(x1)} L{_f(x1)},{_f(x1)}" '
        'fill="none" stroke="black"/>'
    )
    for t in _nice_ticks(view_lo, view_hi):
        tx, ty = px(t), py(t)
        out.append(f'<path class="tick" d="M{_f(tx)},{_f(x1)} v5 M{_f(x0)},{_f(ty)} h-5" stroke="black"/>')
        out.append(f'<text x="{_f(tx)}" y="{_f(x1 + 18)}" text-anchor="middle">{t:.4g}</text>')
        out.append(f'<text x="{_f(x0 - 8)}" y="{_f(ty + 4)}" text-anchor="end">{t:.4g}</text>')
    out.append(
        f'<line class="identity" x1="{_f(px(lo))}" y1="{_f(py(lo))}" x2="{_f(px(hi))}" y2="{_f(py(hi))}" '
        f'data-lo="{lo!r}" data-hi="{hi!r}" stroke="gray" stroke-dasharray="6,4"/>'
    )
    for a, p in pairs:
        out.append(
            f'<circle class="point" cx="{_f(px(a))}" cy="{_f(py(p))}" r="3.5" '
            f'fill="{POSITIVE}" fill-opacity="0.75"/>'
        )
    out.append(f'<text x="{_f(size / 2)}" y="{_f(size - 15)}" text-anchor="middle">actual {escape(label)}</text>')
    out.append(
        f'<text x="15" y="{_f(size / 2)}" text-anchor="middle" '
        f'transform="rotate(-90 15 {_f(size / 2)})">predicted {escape(label)}</text>'
    )
    out.append(f'<text x="{_f(size / 2)}" y="25" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def importance_bar_svg(rows, title="Relative importance of input variables", width=560, bar_height=24):
    """Horizontal bars for ``(name, signed_score, percent)`` rows, drawn top to bottom in the given order.

    Bar length is the percent share; colour carries the sign of the raw score.
    """
    rows = list(rows)
    label_w, top, right = 150, 45, 70
    plot_w = width - label_w - right
    height = top + bar_height * len(rows) + 45
    peak = max((pct for _, _, pct in rows), default=0.0) or 1.0

    out = _header(width, height, title)
    out.append(f'<text x="{_f(width / 2)}" y="25" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for i, (name, score, pct) in enumerate(rows):
        y = top + i * bar_height
        w = pct / peak * plot_w
        color = NEGATIVE if score < 0 else POSITIVE
        out.append(
            f'<rect class="bar" data-feature={quoteattr(name)} data-percent="{pct!r}" '
            f'x="{label_w}" y="{_f(y + 3)}" width="{_f(w)}" height="{bar_height - 6}" fill="{color}"/>'
        )
        out.append(f'<text x="{label_w - 6}" y="{_f(y + bar_height / 2 + 4)}" text-anchor="end">{escape(name)}</text>')
        sign = "-" if score < 0 else "+"
        out.append(f'<text x="{_f(label_w + w + 5)}" y="{_f(y + bar_height / 2 + 4)}">{pct:.1f}% ({sign})</text>')
    legend_y = top + bar_height * len(rows) + 20
    out.append(f'<rect x="{label_w}" y="{legend_y}" width="12" height="12" fill="{POSITIVE}"/>')
    out.append(f'<text x="{label_w + 18}" y="{legend_y + 10}">direct (+)</text>')
    out.append(f'<rect x="{label_w + 110}" y="{legend_y}" width="12" height="12" fill="{NEGATIVE}"/>')
    out.append(f'<text x="{label_w + 128}" y="{legend_y + 10}">inverse (-)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
