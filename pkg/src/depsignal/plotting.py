"""PNG figures written next to the CSV and JSON reports."""

from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .trend import TrendSeries  # noqa: E402

# Fixed metadata keeps PNG bytes independent of the wall clock.
_PNG_META = {"Software": None}


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)


def plot_trend(series: Mapping[str, TrendSeries], path, title: str = "", split_date=None) -> None:
    """Smoothed series per group, raw bin means as faint markers."""
    fig, ax = plt.subplots(figsize=(8, 4))
    for name, s in series.items():
        line, = ax.plot(s.bin_start_dates, s.smoothed, label=name)
        ax.plot(s.bin_start_dates, s.raw_means, ".", color=line.get_color(), alpha=0.3)
    if split_date is not None:
        ax.axvline(split_date, color="grey", linestyle="--", linewidth=1)
    ax.set_ylabel("mean confidence")
    ax.set_title(title)
    ax.legend(loc="best")
    fig.autofmt_xdate()
    _save(fig, path)


def plot_topic_counts(reports: Sequence[dict], path) -> None:
    """Dominant-topic counts, one bar group per period."""
    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.8 / max(1, len(reports))
    for j, rep in enumerate(reports):
        idx = [t["index"] for t in rep["topics"]]
        counts = [t["dominant_count"] for t in rep["topics"]]
        ax.bar([i + j * width for i in idx], counts, width=width, label=rep["period"])
    ax.set_xlabel("topic")
    ax.set_ylabel("chunks with dominant topic")
    ax.legend(loc="best")
    _save(fig, path)


def plot_importance(importances, path, top: int = 20) -> None:
    """Horizontal bars of mean permutation importance with sd whiskers."""
    items = sorted(importances.values(), key=lambda i: -i.mean_importance)[:top][::-1]
    fig, ax = plt.subplots(figsize=(6, 0.3 * len(items) + 1.2))
    ax.barh([i.column for i in items], [i.mean_importance for i in items], xerr=[i.sd for i in items])
    ax.set_xlabel("accuracy drop")
    _save(fig, path)


def plot_learning_curve(rows: Sequence[dict], path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    sizes = [r["size"] for r in rows]
    for key in ("accuracy", "f1", "auc"):
        ax.plot(sizes, [r[key] for r in rows], marker="o", label=key)
    ax.set_xlabel("training users")
    ax.legend(loc="best")
    _save(fig, path)
