"""Deterministic 2D SVG renders of realizations and snap trajectories.

Bars are line segments, knots circles, pinned knots diamonds; knot paths
along a deformation become polylines. Output is plain SVG text with stable
formatting so identical inputs give identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedDimension
from .framework import Framework

PALETTE = ("#1f4fd8", "#00b5c8", "#c81fb0", "#17a341", "#d8341f",
           "#7a1fd8", "#d8a11f", "#5c6370")


@dataclass(frozen=True)
class RenderStyle:
    width: float = 640.0
    margin: float = 30.0
    knot_radius: float = 3.5
    pin_size: float = 6.0
    bar_width: float = 1.8
    path_width: float = 1.2
    colors: tuple[str, ...] = PALETTE


def _fmt(v: float) -> str:
    return "%.6g" % float(v)


class _Canvas:
    """Maps model coordinates to SVG user units (y axis flipped)."""

    def __init__(self, points: np.ndarray, style: RenderStyle):
        lo = points.min(axis=0)
        hi = points.max(axis=0)
        span = np.maximum(hi - lo, 1e-9)
        scale = (style.width - 2 * style.margin) / span[0]
        self.scale = scale
        self.lo = lo
        self.margin = style.margin
        self.height = span[1] * scale + 2 * style.margin
        self.width = style.width

    def map(self, p) -> tuple[float, float]:
        x = self.margin + (p[0] - self.lo[0]) * self.scale
        y = self.height - self.margin - (p[1] - self.lo[1]) * self.scale
        return x, y


def render_svg(framework: Framework, realizations, paths=(),
               style: RenderStyle | None = None, labels=None) -> str:
    """SVG text showing the given realizations and knot trajectories."""
    if framework.dimension != 2:
        raise UnsupportedDimension("SVG rendering is 2D only")
    style = style or RenderStyle()
    realizations = list(realizations)
    paths = list(paths)

    pts = [r.coordinates for r in realizations]
    for p in paths:
        pts += [s.realization.coordinates for s in p.samples]
    if not pts:
        raise UnsupportedDimension("nothing to render")
    canvas = _Canvas(np.vstack(pts), style)

    out = ['<?xml version="1.0" encoding="UTF-8"?>']
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_fmt(canvas.width)}" height="{_fmt(canvas.height)}" '
        f'viewBox="0 0 {_fmt(canvas.width)} {_fmt(canvas.height)}">'
    )

    for pi, path in enumerate(paths):
        color = style.colors[pi % len(style.colors)]
        for k in range(framework.num_knots):
            if (k + 1) in framework.pins:
                continue
            coords = " ".join(
                f"{_fmt(canvas.map(s.realization.coordinates[k])[0])},"
                f"{_fmt(canvas.map(s.realization.coordinates[k])[1])}"
                for s in path.samples
            )
            out.append(
                f'<polyline class="trajectory" fill="none" stroke="{color}" '
                f'stroke-width="{_fmt(style.path_width)}" stroke-dasharray="4 3" '
                f'points="{coords}"/>'
            )

    for ri, r in enumerate(realizations):
        color = style.colors[ri % len(style.colors)]
        name = labels[ri] if labels else f"r{ri}"
        out.append(f'<g class="realization" id="{name}">')
        for e, (i, j) in enumerate(framework.edges):
            x1, y1 = canvas.map(r.coordinates[i - 1])
            x2, y2 = canvas.map(r.coordinates[j - 1])
            out.append(
                f'<line class="bar" x1="{_fmt(x1)}" y1="{_fmt(y1)}" '
                f'x2="{_fmt(x2)}" y2="{_fmt(y2)}" stroke="{color}" '
                f'stroke-width="{_fmt(style.bar_width)}"/>'
            )
        for k in range(framework.num_knots):
            if (k + 1) in framework.pins:
                continue
            cx, cy = canvas.map(r.coordinates[k])
            out.append(
                f'<circle class="knot" cx="{_fmt(cx)}" cy="{_fmt(cy)}" '
                f'r="{_fmt(style.knot_radius)}" fill="{color}"/>'
            )
        out.append("</g>")

    # pins are shared across realizations; draw them once, as black diamonds
    if realizations:
        r0 = realizations[0]
        for k in sorted(framework.pins):
            cx, cy = canvas.map(r0.coordinates[k - 1])
            d = style.pin_size
            points = f"{_fmt(cx)},{_fmt(cy - d)} {_fmt(cx + d)},{_fmt(cy)} " \
                     f"{_fmt(cx)},{_fmt(cy + d)} {_fmt(cx - d)},{_fmt(cy)}"
            out.append(f'<polygon class="pin" points="{points}" fill="#000000"/>')

    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_catalog_svg(framework: Framework, catalog, paths=(),
                       style: RenderStyle | None = None,
                       include: str = "all") -> str:
    """Convenience wrapper: render a catalog's realizations by class."""
    realizations = []
    labels = []
    if include in ("all", "stable"):
        for i, p in enumerate(catalog.stable):
            realizations.append(p.realization)
            labels.append(f"stable{i}")
    if include in ("all", "unstable"):
        for i, p in enumerate(catalog.unstable):
            realizations.append(p.realization)
            labels.append(f"unstable{i}")
    return render_svg(framework, realizations, paths, style, labels)
