"""Report figures written next to the CLI's delimited output."""

import matplotlib as mpl

mpl.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {
    "font.size": 9,
    "axes.linewidth": 0.6,
    "axes.grid": True,
    "grid.linewidth": 0.4,
    "grid.alpha": 0.6,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "figure.figsize": (5.0, 3.4),
    "savefig.dpi": 150,
}

# no version strings or timestamps, so repeated runs write identical files
_PNG_METADATA = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_METADATA)
    plt.close(fig)


def plot_scaling(m_values, seconds, path, label="single sample"):
    """Log-log wall time against m, with a slope-1 guide through the first point."""
    m_values = np.asarray(m_values, dtype=float)
    seconds = np.asarray(seconds, dtype=float)
    with mpl.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.loglog(m_values, seconds, "o-", color="C0", label=label)
        if len(m_values):
            guide = seconds[0] * m_values / m_values[0]
            ax.loglog(m_values, guide, "--", color="0.5", lw=0.8, label="linear in m")
        ax.set_xlabel("edges m")
        ax.set_ylabel("wall time [s]")
        ax.legend(frameon=False)
        _save(fig, path)


def plot_frequencies(counts, path, expected=None):
    """Bar chart of how often each distinct graph was drawn.

    ``counts`` lists one count per graph; ``expected`` draws the uniform level
    with a 3-sigma band.
    """
    counts = np.asarray(counts, dtype=float)
    x = np.arange(len(counts))
    with mpl.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.bar(x, counts, width=0.8, color="C0")
        if expected is not None:
            sigma = np.sqrt(expected * (1.0 - expected / counts.sum()))
            ax.axhline(expected, color="k", lw=0.8)
            ax.axhspan(expected - 3 * sigma, expected + 3 * sigma, color="0.85", zorder=0)
        ax.set_xlabel("graph (sorted by edge list)")
        ax.set_ylabel("samples")
        _save(fig, path)
