"""Figures for the stats/leakage/gen report paths. Rendered headless to PNG."""
from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .noise import NOISE_TYPES  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.dpi": 150,
}
COLORS = {"irrelevant": "#E69F00", "disconnected": "#56B4E9", "supporting": "#009E73"}
# Fixed metadata keeps PNG bytes reproducible across runs.
_PNG_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata=_PNG_META, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_noise_stats(stats: Mapping[Any, Mapping[str, Any]], path: str | Path) -> Path:
    """Mean noise sentences and entities per sample, grouped by k."""
    ks = sorted(int(k) for k in stats)
    rows = {int(k): v for k, v in stats.items()}
    width = 0.8 / len(NOISE_TYPES)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(8, 3), sharex=True)
        for ax, field, label in (
            (axes[0], "mean_sentences", "sentences / sample"),
            (axes[1], "mean_entities", "new entities / sample"),
        ):
            for i, t in enumerate(NOISE_TYPES):
                xs = [k + (i - 1) * width for k in ks]
                ax.bar(xs, [rows[k][t][field] for k in ks], width, color=COLORS[t], label=t)
            ax.set_xlabel("k")
            ax.set_ylabel(label)
            ax.set_xticks(ks)
        axes[0].legend(frameon=False)
        fig.suptitle("Distracting noise per sample")
        return _save(fig, Path(path))


def plot_leakage(report: Mapping[str, Any], path: str | Path) -> Path:
    per_k = {int(k): v for k, v in report["per_k"].items()}
    ks = sorted(per_k)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.bar(ks, [100 * per_k[k]["fraction"] for k in ks], color="#555555")
        for k in ks:
            if per_k[k]["overlap"]:
                ax.annotate(str(per_k[k]["overlap"]), (k, 100 * per_k[k]["fraction"]),
                            ha="center", va="bottom", fontsize=7)
        ax.set_xticks(ks)
        ax.set_xlabel("k")
        ax.set_ylabel("test samples seen in train (%)")
        ax.set_title(f"Train/test overlap, overall {100 * report['fraction']:.2f}%")
        return _save(fig, Path(path))


def plot_counts(counts: Mapping[str, Mapping[Any, int]], path: str | Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        for split, marker in zip(counts, "os^"):
            ks = sorted(int(k) for k in counts[split])
            ax.plot(ks, [counts[split][str(k)] for k in ks], marker=marker, label=split)
        ax.set_xlabel("k")
        ax.set_ylabel("samples")
        ax.legend(frameon=False)
        return _save(fig, Path(path))
