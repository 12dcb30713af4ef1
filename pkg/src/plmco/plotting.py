"""Convergence figures.

Two styles:

* ``mean_ci``: mean of ``best_g - g_star`` against function calls, linear
  axes, with a shaded band of +/- the 95% half-width per algorithm.
* ``semilog_median``: median on a log axis with the best and worst runs as
  thin dashed lines. Values are floored at 1e-16 first.

Figures are built on a bare ``Figure`` (no pyplot state) and written with a
fixed SVG hash salt and no date so identical input gives identical bytes.
"""

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

LOG_FLOOR = 1e-16
STYLES = ("mean_ci", "semilog_median")

_RC = {
    "svg.hashsalt": "plmco",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.linewidth": 0.8,
    "legend.frameon": False,
    "lines.linewidth": 1.4,
}


def _colors(n):
    cycle = matplotlib.rcParams["axes.prop_cycle"].by_key()["color"]
    return [cycle[i % len(cycle)] for i in range(n)]


def _finish(fig, ax, title, ylabel, path):
    ax.set_xlabel("function calls")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    FigureCanvasSVG(fig)
    fig.savefig(path, format="svg", metadata={"Date": None})


def plot_mean_ci(stats, path, title=None, ylabel=r"$G_{best} - G^\star$"):
    """``stats``: list of AggregateStats for one problem."""
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(5.0, 3.6))
        ax = fig.add_subplot(1, 1, 1)
        for s, color in zip(stats, _colors(len(stats))):
            ax.fill_between(s.evals, s.mean - s.ci95, s.mean + s.ci95, color=color, alpha=0.2, linewidth=0)
            ax.plot(s.evals, s.mean, color=color, label=s.algorithm)
        _finish(fig, ax, title, ylabel, path)


def plot_semilog_median(stats, path, title=None, ylabel=r"$G_{best} - G^\star$", offset=0.0):
    """Median with best/worst lines on a log axis.

    ``offset`` is subtracted from every value first (used for the empirical
    reference when the optimum is unknown).
    """
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(5.0, 3.6))
        ax = fig.add_subplot(1, 1, 1)
        floored = False
        for s, color in zip(stats, _colors(len(stats))):
            vals = {}
            for f in ("median", "min", "max"):
                v = np.asarray(getattr(s, f), dtype=float) - offset
                floored |= bool(np.any(v < LOG_FLOOR))
                vals[f] = np.maximum(v, LOG_FLOOR)
            ax.plot(s.evals, vals["median"], color=color, label=s.algorithm)
            ax.plot(s.evals, vals["min"], color=color, linestyle="--", linewidth=0.7)
            ax.plot(s.evals, vals["max"], color=color, linestyle="--", linewidth=0.7)
        ax.set_yscale("log")
        if floored:
            fig.text(0.01, 0.01, f"values below {LOG_FLOOR:g} are drawn at {LOG_FLOOR:g}", fontsize=6,
                     gid="floor-note")
        _finish(fig, ax, title, ylabel, path)


def render(stats, style, path, title=None, empirical=False):
    """Draw one figure; with ``empirical`` the best value observed across
    all algorithms is used as the reference optimum, plus the floor."""
    if style not in STYLES:
        raise ValueError(f"unknown plot style {style!r}; choose from {', '.join(STYLES)}")
    stats = sorted(stats, key=lambda s: s.algorithm)
    if style == "mean_ci":
        label = "best G (empirical reference)" if empirical else r"$G_{best} - G^\star$"
        plot_mean_ci(stats, path, title, ylabel=label)
    else:
        offset = 0.0
        label = r"$G_{best} - G^\star$"
        if empirical:
            offset = min(float(np.nanmin(s.min)) for s in stats) - LOG_FLOOR
            label = r"$G_{best} - G_{best\,observed}$ (empirical)"
        plot_semilog_median(stats, path, title, ylabel=label, offset=offset)
