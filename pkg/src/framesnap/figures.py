"""Matplotlib figures rendered next to CLI reports.

Kept separate from the SVG emitter: these are quick-look raster/vector plots
for humans, the SVG path is the deterministic machine-checkable artifact.
"""

from __future__ import annotations

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  backend must be set first

from .framework import Framework  # noqa: E402

_COLORS = ("tab:blue", "tab:cyan", "tab:pink", "tab:green", "tab:red",
           "tab:purple", "tab:olive", "tab:gray")


def _draw_realization(ax, framework: Framework, coords, color, label=None, alpha=1.0):
    for i, j in framework.edges:
        seg = coords[[i - 1, j - 1]]
        ax.plot(seg[:, 0], seg[:, 1], color=color, lw=2, alpha=alpha,
                solid_capstyle="round")
    free = [k for k in range(framework.num_knots) if (k + 1) not in framework.pins]
    ax.plot(coords[free, 0], coords[free, 1], "o", color=color, ms=5, alpha=alpha,
            label=label)


def _draw_pins(ax, framework: Framework, coords):
    for k in sorted(framework.pins):
        ax.plot(*coords[k - 1], marker="D", color="black", ms=8, zorder=5)


def plot_catalog(framework: Framework, catalog, max_unstable: int = 4):
    """Overlay the stable realizations (solid) and a few saddles (faded)."""
    fig, ax = plt.subplots(figsize=(6, 6))
    for i, p in enumerate(catalog.stable):
        _draw_realization(ax, framework, p.realization.coordinates,
                          _COLORS[i % len(_COLORS)],
                          label=f"stable {i} ({p.classification})")
    for i, p in enumerate(catalog.unstable[:max_unstable]):
        _draw_realization(ax, framework, p.realization.coordinates,
                          _COLORS[(i + len(catalog.stable)) % len(_COLORS)],
                          alpha=0.35, label=f"saddle {i}")
    if catalog.stable:
        _draw_pins(ax, framework, catalog.stable[0].realization.coordinates)
    ax.set_aspect("equal")
    ax.legend(loc="best", fontsize=8)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    return fig


def plot_deformation(framework: Framework, path):
    """Start/end shapes plus each free knot's trajectory and the energy curve."""
    fig, (ax, ax2) = plt.subplots(
        1, 2, figsize=(10, 5), gridspec_kw={"width_ratios": [3, 2]}
    )
    first = path.samples[0].realization.coordinates
    last = path.samples[-1].realization.coordinates
    _draw_realization(ax, framework, first, _COLORS[0], label="start")
    _draw_realization(ax, framework, last, _COLORS[3], label=f"end ({path.status})")
    for k in range(framework.num_knots):
        if (k + 1) in framework.pins:
            continue
        track = np.array([s.realization.coordinates[k] for s in path.samples])
        ax.plot(track[:, 0], track[:, 1], "--", color="gray", lw=1)
    _draw_pins(ax, framework, first)
    ax.set_aspect("equal")
    ax.legend(loc="best", fontsize=8)
    ax.set_xlabel("x")
    ax.set_ylabel("y")

    t = [s.t for s in path.samples]
    dens = [s.density for s in path.samples]
    ax2.plot(t, dens, color=_COLORS[0])
    ax2.set_xlabel("t")
    ax2.set_ylabel("energy density")
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    return fig


def save_figure(fig, destination: str, dpi: int = 150):
    fig.savefig(destination, dpi=dpi)
    plt.close(fig)
