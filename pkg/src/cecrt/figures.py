"""Figure rendering for the report path of the CLI.

Kept out of the analysis module so library users who only want numbers
never touch matplotlib.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .attack import SumMultiset


def render_bhat_figure(summ: SumMultiset, path, title: str = None) -> None:
    """Stem plot of the pairwise-sum distribution with the mode annotated."""
    values = sorted(summ.sums)
    freqs = [summ.sums[v] for v in values]
    xs = [float(v) for v in values]

    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.vlines(xs, 0, freqs, linewidth=1.0, color="tab:blue")
    if freqs:
        top = max(freqs)
        mode_value = values[freqs.index(top)]
        ax.plot([float(mode_value)], [top], "ro", markersize=4)
        ax.annotate(
            f"mode = {mode_value}",
            xy=(float(mode_value), top),
            xytext=(0.55, 0.9),
            textcoords="axes fraction",
            arrowprops=dict(arrowstyle="->", lw=0.8),
            fontsize=9,
        )
    ax.set_xlabel("pairwise sum of distinct cipher values")
    ax.set_ylabel("frequency")
    if title:
        ax.set_title(title)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
