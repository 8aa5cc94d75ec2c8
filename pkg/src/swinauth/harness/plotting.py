"""Prediction-histogram figure, rendered headless to a vector file.

Output is deterministic: the SVG id salt and date metadata are pinned so
reruns over the same predictions write identical bytes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Mapping

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.family": "serif",
    "font.size": 8,
    "axes.titlesize": 9,
    "axes.labelsize": 8,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.bbox": "tight",
    "svg.hashsalt": "swinauth",
    "svg.fonttype": "path",
    "path.simplify": False,
}

ROWS = (("incorrect", "#c0392b"), ("correct", "#2c7fb8"))


def plot_histograms(histograms: Mapping[str, Dict[str, np.ndarray]], edges: np.ndarray, path) -> Path:
    """One column per model; incorrect predictions on top, correct below.

    ``histograms`` maps model name -> {"correct": counts, "incorrect": counts}.
    """
    path = Path(path)
    names = list(histograms)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(2, max(len(names), 1), figsize=(3.2 * max(len(names), 1), 4.0), squeeze=False)
        widths = np.diff(edges)
        for col, name in enumerate(names):
            for row, (series, colour) in enumerate(ROWS):
                ax = axes[row][col]
                counts = np.asarray(histograms[name][series])
                ax.bar(edges[:-1], counts, width=widths, align="edge", color=colour, edgecolor="none")
                ax.set_xlim(0.0, 1.0)
                ax.axvline(0.5, color="0.4", linewidth=0.6, linestyle="--")
                if row == 0:
                    ax.set_title(name)
                if row == 1:
                    ax.set_xlabel("prediction (1 = authentic)")
                if col == 0:
                    ax.set_ylabel(f"{series} patches")
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        fig.savefig(tmp, format="svg", metadata={"Date": None})
        plt.close(fig)
    tmp.replace(path)
    return path
