"""Figure rendering for the report paths.

Every CLI command that emits a delimited report also renders the matching
figure next to it: the cohort-size CDF for evaluations, recall-vs-p for
sweeps, and the wall-clock scaling curve for benchmarks.  The Agg backend
keeps rendering headless.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_STYLE = {
    "figure.figsize": (5.0, 3.4),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_size_cdf(distribution: Sequence[tuple[int, int, float]], path: str | Path,
                  k: int | None = None) -> Path:
    """Empirical CDF of cohort sizes (step plot)."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        if distribution:
            sizes = [row[0] for row in distribution]
            fracs = [row[2] for row in distribution]
            ax.step([sizes[0]] + sizes, [0.0] + fracs, where="post")
        if k is not None:
            ax.axvline(k, color="tab:red", lw=0.8, ls="--", label=f"K = {k}")
            ax.legend()
        ax.set_xlabel("cohort size")
        ax.set_ylabel("cumulative fraction of cohorts")
        ax.set_ylim(0.0, 1.02)
        return _save(fig, path)


def plot_sweep(points, path: str | Path) -> Path:
    """Recall against the kernel power p."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ps = [pt.p for pt in points]
        ax.plot(ps, [pt.macro_recall for pt in points], "o-", label="macro recall")
        ax.plot(ps, [pt.micro_recall for pt in points], "s-", label="micro recall")
        ax.set_xlabel("p")
        ax.set_ylabel("recall")
        ax.set_ylim(0.0, 1.02)
        ax.legend()
        return _save(fig, path)


def plot_bench(rows: Sequence[dict], path: str | Path) -> Path:
    """Wall-clock seconds against n, one line per method, log-log."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        methods = sorted({row["method"] for row in rows})
        for method in methods:
            pts = sorted((row["n"], row["seconds"]) for row in rows if row["method"] == method)
            ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", label=method)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("users")
        ax.set_ylabel("build seconds")
        ax.legend()
        return _save(fig, path)
