"""Minimal SVG line-plot writer.

The package emits CSV as its interface of record; these plots exist so a
curve can be eyeballed without any plotting dependency.  The output is a
single standalone <svg> element: background, axis frame, tick labels, one
polyline per series, and a legend.  All coordinates are formatted with a
fixed precision so the same data always produces the same bytes.
"""

from __future__ import annotations

from .errors import ConfigError

PALETTE = ("#1f6f8b", "#c24d2c", "#4a7c59", "#7d5ba6", "#b08900", "#444444")

WIDTH = 640
HEIGHT = 440
MARGIN_LEFT = 66.0
MARGIN_RIGHT = 18.0
MARGIN_TOP = 36.0
MARGIN_BOTTOM = 50.0
N_TICKS = 5


def _px(v: float) -> str:
    return f"{v:.2f}"


def _bounds(series):
    lo_x = lo_y = float("inf")
    hi_x = hi_y = float("-inf")
    for _, xs, ys in series:
        for v in xs:
            lo_x = min(lo_x, float(v))
            hi_x = max(hi_x, float(v))
        for v in ys:
            lo_y = min(lo_y, float(v))
            hi_y = max(hi_y, float(v))
    if lo_x == hi_x:
        lo_x, hi_x = lo_x - 0.5, hi_x + 0.5
    if lo_y == hi_y:
        lo_y, hi_y = lo_y - 0.5, hi_y + 0.5
    return lo_x, hi_x, lo_y, hi_y


def render_line_plot(series, title: str = "", x_label: str = "",
                     y_label: str = "") -> str:
    """Render `series` as an SVG document string.

    Each series is a (label, xs, ys) triple with equal-length coordinate
    sequences.  Series are drawn in order with a fixed palette, so callers
    control color assignment by ordering.
    """
    series = [(str(label), [float(v) for v in xs], [float(v) for v in ys])
              for label, xs, ys in series]
    if not series:
        raise ConfigError("plot needs at least one series")
    for label, xs, ys in series:
        if len(xs) != len(ys) or not xs:
            raise ConfigError(
                f"series {label!r} needs matching non-empty x/y sequences")

    lo_x, hi_x, lo_y, hi_y = _bounds(series)
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def to_x(v: float) -> float:
        return MARGIN_LEFT + (v - lo_x) / (hi_x - lo_x) * plot_w

    def to_y(v: float) -> float:
        return HEIGHT - MARGIN_BOTTOM - (v - lo_y) / (hi_y - lo_y) * plot_h

    out = []
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
               f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">')
    out.append(f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>')
    out.append(f'<rect x="{_px(MARGIN_LEFT)}" y="{_px(MARGIN_TOP)}" '
               f'width="{_px(plot_w)}" height="{_px(plot_h)}" fill="none" '
               f'stroke="#888888" stroke-width="1"/>')

    for i in range(N_TICKS):
        frac = i / (N_TICKS - 1)
        vx = lo_x + frac * (hi_x - lo_x)
        vy = lo_y + frac * (hi_y - lo_y)
        px = to_x(vx)
        py = to_y(vy)
        out.append(f'<line x1="{_px(px)}" y1="{_px(HEIGHT - MARGIN_BOTTOM)}" '
                   f'x2="{_px(px)}" y2="{_px(HEIGHT - MARGIN_BOTTOM + 5)}" '
                   f'stroke="#888888" stroke-width="1"/>')
        out.append(f'<text x="{_px(px)}" y="{_px(HEIGHT - MARGIN_BOTTOM + 19)}" '
                   f'font-family="sans-serif" font-size="11" '
                   f'text-anchor="middle" fill="#333333">{vx:.3g}</text>')
        out.append(f'<line x1="{_px(MARGIN_LEFT - 5)}" y1="{_px(py)}" '
                   f'x2="{_px(MARGIN_LEFT)}" y2="{_px(py)}" '
                   f'stroke="#888888" stroke-width="1"/>')
        out.append(f'<text x="{_px(MARGIN_LEFT - 8)}" y="{_px(py + 4)}" '
                   f'font-family="sans-serif" font-size="11" '
                   f'text-anchor="end" fill="#333333">{vy:.3g}</text>')

    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_px(to_x(x))},{_px(to_y(y))}"
                       for x, y in zip(xs, ys))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   f'stroke-width="1.6"/>')
        ly = MARGIN_TOP + 16 + 16 * i
        lx = WIDTH - MARGIN_RIGHT - 150
        out.append(f'<line x1="{_px(lx)}" y1="{_px(ly - 4)}" '
                   f'x2="{_px(lx + 22)}" y2="{_px(ly - 4)}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_px(lx + 28)}" y="{_px(ly)}" '
                   f'font-family="sans-serif" font-size="12" '
                   f'fill="#333333">{label}</text>')

    if title:
        out.append(f'<text x="{_px(WIDTH / 2)}" y="{_px(MARGIN_TOP - 12)}" '
                   f'font-family="sans-serif" font-size="14" '
                   f'text-anchor="middle" fill="#111111">{title}</text>')
    if x_label:
        out.append(f'<text x="{_px(MARGIN_LEFT + plot_w / 2)}" '
                   f'y="{_px(HEIGHT - 10)}" font-family="sans-serif" '
                   f'font-size="12" text-anchor="middle" '
                   f'fill="#111111">{x_label}</text>')
    if y_label:
        cy = MARGIN_TOP + plot_h / 2
        out.append(f'<text x="16" y="{_px(cy)}" font-family="sans-serif" '
                   f'font-size="12" text-anchor="middle" fill="#111111" '
                   f'transform="rotate(-90 16 {_px(cy)})">{y_label}</text>')

    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_line_plot(path, series, title: str = "", x_label: str = "",
                    y_label: str = "") -> None:
    doc = render_line_plot(series, title=title, x_label=x_label,
                           y_label=y_label)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(doc)
