"""Matplotlib rendering of experiment reports.

Every experiment writes its delimited tables and, next to them, a small
set of PNG figures. Rendering is file-only (Agg backend, no display).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def plot_system_bars(values: dict[str, float], title: str, path: str | Path) -> None:
    """One bar per system (control-study summary)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    names = list(values)
    ax.bar(range(len(names)), [values[n] for n in names], color="#4878a8")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylabel("BLEU")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_bucket_curves(
    buckets: list[str],
    series: dict[str, list[float | None]],
    title: str,
    xlabel: str,
    path: str | Path,
) -> None:
    """BLEU per bucket for several systems (length / unknown-word curves)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = range(len(buckets))
    for name, values in series.items():
        pts = [(x, v) for x, v in zip(xs, values) if v is not None]
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=name)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(buckets, rotation=20, ha="right")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("BLEU")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_rate_curves(
    rates: list[float],
    series: dict[str, list[float]],
    title: str,
    ylabel: str,
    path: str | Path,
) -> None:
    """Values vs UNK-injection rate (robustness curves)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, values in series.items():
        ax.plot([100 * r for r in rates], values, marker="o", label=name)
    ax.set_xlabel("injected unknown-word rate (%)")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
