"""Figure rendering for CLI artifacts.

Each function writes one PNG next to the delimited output it depicts.
The Agg backend keeps rendering headless and deterministic.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

__all__ = [
    "heatmap_figure",
    "histogram_figure",
    "scatter_figure",
    "decomposition_figure",
]

_DPI = 120


def heatmap_figure(grids: dict, path) -> None:
    """2x3 panel of pass-through over the (s, x) square, one cell per regime.

    ``grids`` maps (row_label, column_label) to a long-format grid frame
    with s, x, and phi columns; rows share a color scale clipped to [0, 1].
    """
    rows = sorted({key[0] for key in grids})
    cols = sorted({key[1] for key in grids})
    fig, axes = plt.subplots(
        len(rows), len(cols), figsize=(4.0 * len(cols), 3.4 * len(rows)),
        squeeze=False, constrained_layout=True,
    )
    mesh = None
    for i, row in enumerate(rows):
        for j, col in enumerate(cols):
            frame = grids[(row, col)]
            n = int(np.sqrt(len(frame)))
            phi = frame["phi"].to_numpy().reshape(n, n)
            axis = axes[i][j]
            mesh = axis.pcolormesh(
                frame["x"].to_numpy().reshape(n, n),
                frame["s"].to_numpy().reshape(n, n),
                np.clip(phi, 0.0, 1.0),
                vmin=0.0, vmax=1.0, shading="auto",
            )
            axis.set_title(f"{col}, {row}", fontsize=10)
            axis.set_xlabel("buyer share x")
            axis.set_ylabel("supplier share s")
    fig.colorbar(mesh, ax=[axis for row in axes for axis in row], label="pass-through")
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def histogram_figure(frame: pd.DataFrame, truth, path) -> None:
    """Histograms of the replica estimates with the truth marked."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.4), constrained_layout=True)
    for axis, column, value, label in (
        (axes[0], "phi_hat", truth.phi, "bargaining weight"),
        (axes[1], "theta_hat", truth.theta, "returns-to-scale"),
    ):
        axis.hist(frame[column].to_numpy(), bins=30, color="#4878b0", alpha=0.85)
        axis.axvline(value, color="#c44e52", linewidth=1.5)
        axis.set_xlabel(label)
        axis.set_ylabel("replicas")
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def scatter_figure(observed, predicted, path) -> None:
    """Observed against predicted changes with the 45-degree line."""
    observed = np.asarray(observed, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    fig, axis = plt.subplots(figsize=(4.6, 4.2), constrained_layout=True)
    axis.scatter(predicted, observed, s=12, alpha=0.5, color="#4878b0")
    lo = float(min(predicted.min(), observed.min()))
    hi = float(max(predicted.max(), observed.max()))
    axis.plot([lo, hi], [lo, hi], color="#c44e52", linewidth=1.2)
    axis.set_xlabel("predicted log price change")
    axis.set_ylabel("observed log price change")
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def decomposition_figure(report: dict, path) -> None:
    """Aggregate pass-through by channel plus the variance split."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6), constrained_layout=True)
    labels = ["full", "cost only", "markup only"]
    rates = [
        report["passthrough_full"],
        report["passthrough_cost_only"],
        report["passthrough_markup_only"],
    ]
    axes[0].bar(labels, rates, color=["#4878b0", "#6baf6b", "#c44e52"])
    axes[0].axhline(1.0, color="gray", linewidth=0.8, linestyle="--")
    axes[0].set_ylabel("aggregate pass-through")
    shares = [report["variance_share_cost"], report["variance_share_markup"]]
    axes[1].bar(["cost channel", "markup channel"], shares, color=["#6baf6b", "#c44e52"])
    axes[1].set_ylabel("variance share")
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
