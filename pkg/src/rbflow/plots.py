"""Static SVG rendering for experiment artifacts."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_CMAP = "viridis"


def render_line_svg(path, series: dict, xlabel: str = "", ylabel: str = "",
                    title: str = "", logy: bool = False):
    """series: label -> (x, y). A single point gets a visible marker."""
    if not series or all(len(np.atleast_1d(xy[1])) == 0 for xy in series.values()):
        raise ValueError("nothing to plot")
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (x, y) in series.items():
        x = np.atleast_1d(x)
        y = np.atleast_1d(y)
        marker = "o" if len(y) == 1 else None
        ax.plot(x, y, label=label, marker=marker)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if len(series) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def render_heatmap_svg(path, grid: np.ndarray, extent=None, title: str = "",
                       xlabel: str = "", ylabel: str = ""):
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("nothing to plot")
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    im = ax.imshow(grid, origin="lower", extent=extent, cmap=_CMAP, aspect="auto")
    fig.colorbar(im, ax=ax)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def render_quiver_svg(path, xg: np.ndarray, yg: np.ndarray, u: np.ndarray, v: np.ndarray,
                      background: np.ndarray | None = None, extent=None, title: str = ""):
    """Arrows normalized by the maximum magnitude; optional density backdrop."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.size == 0:
        raise ValueError("nothing to plot")
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    if background is not None:
        im = ax.imshow(background, origin="lower", extent=extent, cmap=_CMAP, aspect="auto")
        fig.colorbar(im, ax=ax)
    max_mag = float(np.max(np.hypot(u, v)))
    ax.quiver(xg, yg, u, v, color="white" if background is not None else "black",
              scale=10.0 * max(max_mag, 1e-300), scale_units="width")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def render_svg(path, *, series: dict | None = None, heatmap: np.ndarray | None = None,
               quiver: tuple | None = None, **kwargs):
    """Dispatch on the payload kind; exactly one of the three must be given."""
    given = [series is not None, heatmap is not None, quiver is not None]
    if sum(given) != 1:
        raise ValueError("provide exactly one of series/heatmap/quiver")
    if series is not None:
        return render_line_svg(path, series, **kwargs)
    if heatmap is not None:
        return render_heatmap_svg(path, heatmap, **kwargs)
    return render_quiver_svg(path, *quiver, **kwargs)
