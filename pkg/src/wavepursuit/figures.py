"""Static SVG rendering of traces: trajectories, distance curves, and the
turning-versus-closure overlay.

The files are written by hand rather than through a plotting package so the
bytes are a pure function of the inputs; regression tests compare them
directly. Pixel coordinates are rounded to 0.01 so float noise cannot creep
into the output.
"""

from __future__ import annotations

import math

import numpy as np

from .analysis import curvature_closure_correlation
from .engine import GameTrace
from .environment import Circle, EnvironmentSpec, Rect
from .errors import ValidationError

__all__ = ["FIGURE_KINDS", "render_figure"]

FIGURE_KINDS = ("trajectories", "distance", "closure")

W, H = 640.0, 480.0
MARGIN = 46.0
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _polyline(xs, ys, color, width=1.5, dash=None) -> str:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline fill="none" stroke="{color}" stroke-width="{width}"'
            f'{dash_attr} points="{pts}"/>')


def _text(x, y, s, size=12, anchor="start", color="#333333") -> str:
    return (f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" '
            f'font-family="sans-serif" text-anchor="{anchor}" fill="{color}">{s}</text>')


def _document(body: list, title: str) -> str:
    head = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:g}" height="{H:g}" '
        f'viewBox="0 0 {W:g} {H:g}">',
        f'<rect x="0" y="0" width="{W:g}" height="{H:g}" fill="#ffffff"/>',
        _text(W / 2, 22, title, size=14, anchor="middle"),
    ]
    return "\n".join(head + body + ["</svg>"]) + "\n"


def _axes(x0, y0, x1, y1) -> list:
    # y0 is the bottom of the plot area in pixel coords (larger value)
    return [
        _polyline([x0, x0], [y1, y0], "#888888", width=1.0),
        _polyline([x0, x1], [y0, y0], "#888888", width=1.0),
    ]


def _check_traces(traces) -> list:
    if isinstance(traces, GameTrace):
        traces = [traces]
    traces = list(traces)
    if not traces:
        raise ValidationError("no traces given")
    for tr in traces:
        if len(tr) == 0:
            raise ValidationError("empty trace cannot be rendered")
    return traces


def _label(trace: GameTrace, index: int, labels) -> str:
    if labels is not None and index < len(labels):
        return labels[index]
    return str(trace.metadata.get("scenario", f"trace {index}"))


# -- kinds -----------------------------------------------------------------------

def _render_trajectories(traces, environment: EnvironmentSpec | None, labels) -> str:
    if environment is not None:
        wx0, wy0, wx1, wy1 = 0.0, 0.0, environment.width, environment.height
    else:
        pts = np.vstack([np.vstack([tr.pursuer, tr.evader]) for tr in traces])
        pad = 0.5
        wx0, wy0 = pts.min(axis=0) - pad
        wx1, wy1 = pts.max(axis=0) + pad
    span = max(wx1 - wx0, wy1 - wy0)
    scale = (min(W, H) - 2 * MARGIN) / span

    def to_px(x, y):
        # flip y so the world's up is the page's up
        return (MARGIN + (np.asarray(x) - wx0) * scale,
                H - MARGIN - (np.asarray(y) - wy0) * scale)

    body = []
    if environment is not None:
        bx, by = to_px(np.array([wx0, wx1]), np.array([wy0, wy1]))
        body.append(f'<rect x="{_fmt(bx[0])}" y="{_fmt(by[1])}" '
                    f'width="{_fmt(bx[1] - bx[0])}" height="{_fmt(by[0] - by[1])}" '
                    f'fill="none" stroke="#555555" stroke-width="1.5"/>')
        for shape in environment.obstacles:
            if isinstance(shape, Rect):
                px, py = to_px(np.array([shape.xmin, shape.xmax]),
                               np.array([shape.ymin, shape.ymax]))
                body.append(f'<rect x="{_fmt(px[0])}" y="{_fmt(py[1])}" '
                            f'width="{_fmt(px[1] - px[0])}" height="{_fmt(py[0] - py[1])}" '
                            f'fill="#dddddd" stroke="#555555"/>')
            elif isinstance(shape, Circle):
                cx, cy = to_px(shape.cx, shape.cy)
                body.append(f'<circle cx="{_fmt(float(cx))}" cy="{_fmt(float(cy))}" '
                            f'r="{_fmt(shape.radius * scale)}" '
                            f'fill="#dddddd" stroke="#555555"/>')

    for i, tr in enumerate(traces):
        color = PALETTE[(2 * i) % len(PALETTE)]
        ecolor = PALETTE[(2 * i + 1) % len(PALETTE)]
        px, py = to_px(tr.pursuer[:, 0], tr.pursuer[:, 1])
        ex, ey = to_px(tr.evader[:, 0], tr.evader[:, 1])
        body.append(_polyline(px, py, color, width=1.8))
        body.append(_polyline(ex, ey, ecolor, width=1.8, dash="6 3"))
        body.append(f'<circle cx="{_fmt(px[0])}" cy="{_fmt(py[0])}" r="4" fill="{color}"/>')
        body.append(f'<circle cx="{_fmt(ex[0])}" cy="{_fmt(ey[0])}" r="4" fill="{ecolor}"/>')
        name = _label(tr, i, labels)
        body.append(_text(MARGIN, H - 12 - 16 * i,
                          f"{name}: pursuer solid, evader dashed", size=11))
    return _document(body, "trajectories")


def _series_frame(tmax, vmax, vmin=0.0):
    x0, x1 = MARGIN, W - MARGIN
    y0, y1 = H - MARGIN, MARGIN  # y0 bottom, y1 top

    def to_px(t, v):
        tx = x0 + (np.asarray(t) / tmax) * (x1 - x0) if tmax > 0 else x0
        ty = y0 - (np.asarray(v) - vmin) / (vmax - vmin) * (y0 - y1)
        return tx, ty

    return x0, y0, x1, y1, to_px


def _render_distance(traces, labels) -> str:
    tmax = max(float(tr.t[-1]) for tr in traces)
    vmax = max(float(tr.distance.max()) for tr in traces) * 1.05 or 1.0
    x0, y0, x1, y1, to_px = _series_frame(tmax, vmax)
    body = _axes(x0, y0, x1, y1)
    body.append(_text(x0 - 6, y0 + 14, "0", anchor="end", size=10))
    body.append(_text(x1, y0 + 14, f"t = {tmax:g} s", anchor="end", size=10))
    body.append(_text(x0 - 6, y1 + 4, f"{vmax:.2f} m", anchor="end", size=10))
    for i, tr in enumerate(traces):
        color = PALETTE[i % len(PALETTE)]
        tx, ty = to_px(tr.t, tr.distance)
        body.append(_polyline(tx, ty, color))
        body.append(_text(x1 - 4, y1 + 16 + 14 * i, _label(tr, i, labels),
                          anchor="end", size=11, color=color))
    return _document(body, "relative distance")


def _render_closure(traces, labels, report=None) -> str:
    # one trace: normalized path turning and relative distance share the x axis
    tr = traces[0]
    rep = report if report is not None else curvature_closure_correlation(tr)
    tmax = float(tr.t[-1])
    dmax = float(tr.distance.max()) * 1.05 or 1.0

    x0, y0, x1, y1, to_d = _series_frame(tmax, dmax)
    _, _, _, _, to_k = _series_frame(tmax, 1.05)
    body = _axes(x0, y0, x1, y1)
    dx, dy = to_d(tr.t, tr.distance)
    kx, ky = to_k(tr.t, rep.curvature)
    body.append(_polyline(dx, dy, PALETTE[0]))
    body.append(_polyline(kx, ky, PALETTE[1], dash="4 3"))
    for k in rep.peaks:
        px, py = to_k(tr.t[k], rep.curvature[k])
        body.append(f'<circle cx="{_fmt(float(px))}" cy="{_fmt(float(py))}" r="3.5" '
                    f'fill="none" stroke="{PALETTE[1]}" stroke-width="1.5"/>')
    body.append(_text(x1 - 4, y1 + 16, "distance", anchor="end", size=11,
                      color=PALETTE[0]))
    body.append(_text(x1 - 4, y1 + 30, "turning (normalized), peaks ringed",
                      anchor="end", size=11, color=PALETTE[1]))
    body.append(_text(x0 - 6, y0 + 14, "0", anchor="end", size=10))
    body.append(_text(x1, y0 + 14, f"t = {tmax:g} s", anchor="end", size=10))
    matched = rep.fraction_matched
    note = "no turning peaks" if math.isnan(matched) \
        else f"{rep.matched_peaks.size}/{rep.peaks.size} peaks matched within {rep.window} ticks"
    body.append(_text(W / 2, H - 10, note, anchor="middle", size=11))
    return _document(body, "turning vs closure")


def render_figure(traces, kind: str, path, environment: EnvironmentSpec | None = None,
                  labels=None, report=None) -> None:
    """Write one SVG file. kind is one of trajectories / distance / closure.

    report lets the caller reuse a turning analysis already computed for the
    closure overlay; the other kinds ignore it.
    """
    traces = _check_traces(traces)
    if kind == "trajectories":
        text = _render_trajectories(traces, environment, labels)
    elif kind == "distance":
        text = _render_distance(traces, labels)
    elif kind == "closure":
        text = _render_closure(traces, labels, report)
    else:
        raise ValidationError(f"unknown figure kind {kind!r}", field="kind")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
