"""SVG figures for the sweep summaries.  Output bytes are stable for fixed input."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import BinStat, GapStat  # noqa: E402

_RC = {"svg.hashsalt": "nestedaa", "svg.fonttype": "path", "font.size": 9}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def binned_figure(stats: Sequence[BinStat], xlabel: str, path: Path, title: str = "") -> Path:
    """Mean and median lines over a 1-sigma band, bin counts underneath."""
    with plt.rc_context(_RC):
        return _save(build_binned_figure(stats, xlabel, title), path)


def build_binned_figure(stats: Sequence[BinStat], xlabel: str, title: str = ""):
    filled = [s for s in stats if s.count > 0]
    with plt.rc_context(_RC):
        fig, (ax, hx) = plt.subplots(
            2, 1, figsize=(5.5, 4.5), sharex=True, gridspec_kw={"height_ratios": [3, 1]}
        )
        centers = [s.lo + 0.05 for s in filled]
        means = [s.mean for s in filled]
        lo = [s.mean - s.std for s in filled]
        hi = [s.mean + s.std for s in filled]
        ax.fill_between(centers, lo, hi, alpha=0.25, color="tab:blue", label="1$\\sigma$")
        ax.plot(centers, means, "o-", color="tab:blue", label="mean")
        ax.plot(centers, [s.median for s in filled], "s--", color="tab:orange", label="median")
        ax.axhline(0.0, color="0.4", lw=0.8)
        ax.set_ylabel("$c_{rel}$")
        ax.legend(loc="best", frameon=False)
        if title:
            ax.set_title(title)
        hx.bar([s.lo + 0.05 for s in stats], [s.count for s in stats], width=0.1, color="0.6", edgecolor="0.3")
        hx.set_ylabel("count")
        hx.set_xlabel(xlabel)
        fig.tight_layout()
    return fig


def gap_figure(stats: Sequence[GapStat], path: Path, title: str = "") -> Path:
    with plt.rc_context(_RC):
        return _save(build_gap_figure(stats, title), path)


def build_gap_figure(stats: Sequence[GapStat], title: str = ""):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.5))
        for proto, marker in (("baseline", "o"), ("nested", "s")):
            rows = [s for s in stats if s.protocol == proto]
            if rows:
                ax.errorbar(
                    [s.t for s in rows], [s.mean for s in rows], yerr=[s.std for s in rows],
                    marker=marker, capsize=3, label=proto,
                )
        ax.set_xlabel("budget exponent $t$")
        ax.set_ylabel("optimality gap $\\gamma$")
        ax.set_ylim(-0.05, 1.05)
        ax.legend(loc="best", frameon=False)
        if title:
            ax.set_title(title)
        fig.tight_layout()
    return fig
