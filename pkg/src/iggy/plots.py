"""Figure rendering: every figure is written as a self-contained SVG next to
a TSV holding the plotted series, so reports stay scriptable.

SVG output is made byte-deterministic (fixed hash salt, no embedded date) so
rerun manifests can compare artifact checksums.
"""

from __future__ import annotations

from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "iggy"

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path: str) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_series_tsv(path: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(repr(v) if isinstance(v, float) else str(v)
                               for v in row) + "\n")


def plot_precision_at_k(curves: dict[str, list[tuple[int, float]]],
                        svg_path: str, tsv_path: Optional[str] = None,
                        title: str = "Precision at k") -> None:
    """One line per model; underlying series written as TSV."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name in sorted(curves):
        ks = [k for k, _ in curves[name]]
        ps = [p for _, p in curves[name]]
        ax.plot(ks, ps, marker="o", markersize=3, label=name)
    ax.set_xlabel("k")
    ax.set_ylabel("precision")
    ax.set_ylim(0.0, 1.05)
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, svg_path)

    if tsv_path:
        rows = []
        for name in sorted(curves):
            for k, p in curves[name]:
                rows.append([name, k, float(p)])
        write_series_tsv(tsv_path, ["model", "k", "precision"], rows)


def plot_metric_bars(values: dict[str, float], svg_path: str,
                     tsv_path: Optional[str] = None,
                     ylabel: str = "score", title: str = "") -> None:
    names = sorted(values)
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(names)), 4))
    ax.bar(range(len(names)), [values[n] for n in names], color="#4878a8")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    _save(fig, svg_path)
    if tsv_path:
        write_series_tsv(tsv_path, ["model", ylabel],
                         [[n, float(values[n])] for n in names])


def plot_correlation_heatmap(names: Sequence[str], matrix: np.ndarray,
                             svg_path: str, tsv_path: Optional[str] = None,
                             title: str = "Model score correlation") -> None:
    fig, ax = plt.subplots(figsize=(1.0 + 0.8 * len(names), 0.8 + 0.8 * len(names)))
    im = ax.imshow(matrix, vmin=-1.0, vmax=1.0, cmap="RdBu_r")
    ax.set_xticks(range(len(names)))
    ax.set_yticks(range(len(names)))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_yticklabels(names, fontsize=8)
    for i in range(len(names)):
        for j in range(len(names)):
            ax.text(j, i, f"{matrix[i, j]:.2f}", ha="center", va="center", fontsize=7)
    ax.set_title(title)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    _save(fig, svg_path)
    if tsv_path:
        rows = []
        for i, a in enumerate(names):
            for j, b in enumerate(names):
                rows.append([a, b, float(matrix[i, j])])
        write_series_tsv(tsv_path, ["model_a", "model_b", "spearman_rho"], rows)
