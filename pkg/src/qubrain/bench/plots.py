"""PNG rendering of the run summaries (boxplots and learning curves)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import SUMMARY_METRICS  # noqa: E402

# quartiles match boxplot_stats: linear interpolation, whiskers at 1.5 IQR
_BOX_KW = dict(whis=1.5, showfliers=True)


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_boxplots(by_model: dict, path, metrics=SUMMARY_METRICS) -> Path:
    """One panel per metric, one box per model."""
    fig, axes = plt.subplots(1, len(metrics), figsize=(3.2 * len(metrics), 3.6), squeeze=False)
    names = list(by_model)
    for ax, metric in zip(axes[0], metrics):
        data = [[getattr(r.metrics, metric) for r in by_model[m]] for m in names]
        ax.boxplot(data, **_BOX_KW)
        ax.set_xticks(range(1, len(names) + 1), names, rotation=30, ha="right")
        ax.set_title(metric)
        ax.set_ylim(-0.02, 1.02)
        ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_metric_comparison(by_model: dict, out_dir) -> list[Path]:
    """``boxplot_<metric>.png`` across all models, one file per metric."""
    paths = []
    for metric in SUMMARY_METRICS:
        fig, ax = plt.subplots(figsize=(1.1 * len(by_model) + 2.5, 3.6))
        names = list(by_model)
        ax.boxplot([[getattr(r.metrics, metric) for r in by_model[m]] for m in names], **_BOX_KW)
        ax.set_xticks(range(1, len(names) + 1), names, rotation=30, ha="right")
        ax.set_ylabel(metric)
        ax.grid(axis="y", alpha=0.3)
        fig.tight_layout()
        paths.append(_save(fig, Path(out_dir) / f"boxplot_{metric}.png"))
    return paths


def plot_curves(records, path, title: str = "") -> Path:
    """Training and validation loss per epoch; thin lines per seed, bold mean."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.4), sharey=True)
    for ax, key in zip(axes, ("train_loss", "val_loss")):
        curves = [np.asarray(getattr(r, key)) for r in records]
        for c in curves:
            ax.plot(np.arange(1, c.size + 1), c, lw=0.7, alpha=0.4)
        n = min(c.size for c in curves)
        if n:
            ax.plot(np.arange(1, n + 1), np.mean([c[:n] for c in curves], axis=0), color="k", lw=1.6, label="mean")
            ax.legend()
        ax.set_xlabel("epoch")
        ax.set_title(f"{title} {key.replace('_', ' ')}".strip())
        ax.grid(alpha=0.3)
    axes[0].set_ylabel("loss")
    fig.tight_layout()
    return _save(fig, path)
