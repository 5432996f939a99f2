"""Standalone SVG line plots and side-by-side scatter panels.

Output is a pure function of the input: fixed 800x500 viewport, fixed number
formatting, no timestamps.
"""
from __future__ import annotations

from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import InvalidInput

WIDTH, HEIGHT = 800, 500
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
_MARGIN = {"left": 60, "right": 20, "top": 40, "bottom": 50}


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, count: int = 5):
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi, np.linspace(lo, hi, count)


def _point_color(i: int) -> str:
    # per-index colour, identical across panels so points can be followed
    h = (i * 2654435761) & 0xFFFFFF
    return f"#{h:06x}"


class _Panel:
    def __init__(self, x0, y0, w, h, xr, yr):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        self.xlo, self.xhi, self.xt = _ticks(*xr)
        self.ylo, self.yhi, self.yt = _ticks(*yr)

    def px(self, x):
        return self.x0 + (np.asarray(x, float) - self.xlo) / (self.xhi - self.xlo) * self.w

    def py(self, y):
        return self.y0 + self.h - (np.asarray(y, float) - self.ylo) / (self.yhi - self.ylo) * self.h

    def axes(self, xlabel="", ylabel="") -> list[str]:
        out = [f'<rect x="{_fmt(self.x0)}" y="{_fmt(self.y0)}" width="{_fmt(self.w)}" '
               f'height="{_fmt(self.h)}" fill="none" stroke="#000"/>']
        for t in self.xt:
            x = self.px(t)
            out.append(f'<line x1="{_fmt(x)}" y1="{_fmt(self.y0 + self.h)}" x2="{_fmt(x)}" '
                       f'y2="{_fmt(self.y0 + self.h + 5)}" stroke="#000"/>')
            out.append(f'<text x="{_fmt(x)}" y="{_fmt(self.y0 + self.h + 18)}" '
                       f'text-anchor="middle" font-size="11">{t:.3g}</text>')
        for t in self.yt:
            y = self.py(t)
            out.append(f'<line x1="{_fmt(self.x0 - 5)}" y1="{_fmt(y)}" x2="{_fmt(self.x0)}" '
                       f'y2="{_fmt(y)}" stroke="#000"/>')
            out.append(f'<text x="{_fmt(self.x0 - 8)}" y="{_fmt(y + 4)}" '
                       f'text-anchor="end" font-size="11">{t:.3g}</text>')
        if xlabel:
            out.append(f'<text x="{_fmt(self.x0 + self.w / 2)}" y="{_fmt(self.y0 + self.h + 38)}" '
                       f'text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
        if ylabel:
            cx, cy = self.x0 - 45, self.y0 + self.h / 2
            out.append(f'<text x="{_fmt(cx)}" y="{_fmt(cy)}" text-anchor="middle" font-size="12" '
                       f'transform="rotate(-90 {_fmt(cx)} {_fmt(cy)})">{escape(ylabel)}</text>')
        return out


def _normalize_series(series) -> list[tuple[str, np.ndarray, np.ndarray]]:
    items = series.items() if isinstance(series, Mapping) else \
        ((s[0], (s[1], s[2])) for s in series)
    out = []
    for name, (xs, ys) in items:
        xs, ys = np.asarray(xs, float).ravel(), np.asarray(ys, float).ravel()
        if xs.shape != ys.shape:
            raise InvalidInput(f"series {name!r}: x and y differ in length")
        if xs.size == 0:
            raise InvalidInput(f"series {name!r} is empty")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise InvalidInput(f"series {name!r} contains non-finite values")
        out.append((str(name), xs, ys))
    if not out:
        raise InvalidInput("nothing to plot")
    return out


def render_svg(series, mode: str = "line", title: str = "", xlabel: str = "",
               ylabel: str = "", annotations: Sequence[tuple] = (),
               max_points: int = 4000) -> str:
    """Build the SVG document as a string.

    ``series`` maps a name to ``(xs, ys)``. In ``"line"`` mode all series share
    one panel and get a legend; in ``"scatter"`` mode each series gets its own
    panel, side by side, with points coloured by their row index.
    ``annotations`` are ``(x, y, label)`` markers on the line panel.
    """
    items = _normalize_series(series)
    if mode not in ("line", "scatter"):
        raise InvalidInput(f"unknown plot mode {mode!r}")
    body: list[str] = []
    if title:
        body.append(f'<text x="{WIDTH / 2:.2f}" y="22.00" text-anchor="middle" '
                    f'font-size="15">{escape(title)}</text>')
    m = _MARGIN
    if mode == "line":
        xs_all = np.concatenate([s[1] for s in items])
        ys_all = np.concatenate([s[2] for s in items])
        panel = _Panel(m["left"], m["top"], WIDTH - m["left"] - m["right"] - 120,
                       HEIGHT - m["top"] - m["bottom"],
                       (xs_all.min(), xs_all.max()), (ys_all.min(), ys_all.max()))
        body += panel.axes(xlabel, ylabel)
        for k, (name, xs, ys) in enumerate(items):
            color = PALETTE[k % len(PALETTE)]
            pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(panel.px(xs), panel.py(ys)))
            body.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                        f'points="{pts}"/>')
            ly = m["top"] + 10 + 18 * k
            lx = WIDTH - m["right"] - 110
            body.append(f'<line x1="{lx:.2f}" y1="{ly:.2f}" x2="{lx + 20:.2f}" y2="{ly:.2f}" '
                        f'stroke="{color}" stroke-width="2"/>')
            body.append(f'<text x="{lx + 26:.2f}" y="{ly + 4:.2f}" font-size="11">'
                        f'{escape(name)}</text>')
        for ax, ay, label in annotations:
            cx, cy = float(panel.px(ax)), float(panel.py(ay))
            body.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="4" fill="none" '
                        f'stroke="#d62728"/>')
            body.append(f'<text x="{_fmt(cx + 6)}" y="{_fmt(cy - 6)}" font-size="11" '
                        f'fill="#d62728">{escape(str(label))}</text>')
    else:
        gap = 30
        n = len(items)
        w = (WIDTH - m["left"] - m["right"] - gap * (n - 1)) / n
        for k, (name, xs, ys) in enumerate(items):
            panel = _Panel(m["left"] + k * (w + gap), m["top"], w, HEIGHT - m["top"] - m["bottom"],
                           (min(0.0, xs.min()), max(1.0, xs.max())),
                           (min(0.0, ys.min()), max(1.0, ys.max())))
            body.append(f'<g id="panel-{k}">')
            body.append(f'<text x="{_fmt(panel.x0 + w / 2)}" y="{_fmt(m["top"] - 6)}" '
                        f'text-anchor="middle" font-size="12">{escape(name)}</text>')
            body += panel.axes(xlabel, ylabel if k == 0 else "")
            stride = max(1, int(np.ceil(xs.size / max_points)))
            for i in range(0, xs.size, stride):
                body.append(f'<circle cx="{_fmt(float(panel.px(xs[i])))}" '
                            f'cy="{_fmt(float(panel.py(ys[i])))}" r="1.5" '
                            f'fill="{_point_color(i)}"/>')
            body.append("</g>")
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">\n<rect width="100%" height="100%" fill="#fff"/>\n')
    return head + "\n".join(body) + "\n</svg>\n"


def emit_svg_lineplot(series, path, mode: str = "line", **kwargs) -> None:
    """Render ``series`` (see :func:`render_svg`) and write it to ``path``."""
    doc = render_svg(series, mode, **kwargs)
    try:
        with open(path, "w") as fh:
            fh.write(doc)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
