"""Matplotlib renderings written next to the CLI's delimited output."""

from __future__ import annotations

import logging
import pathlib
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .classifier import CompatibilityCase  # noqa: E402
from .model import Interval  # noqa: E402

log = logging.getLogger(__name__)

_CASE_COLORS = {
    CompatibilityCase.GUARANTEED_LACK: "#b2182b",
    CompatibilityCase.POTENTIAL_LACK: "#ef8a62",
    CompatibilityCase.COMPATIBLE: "#4d9221",
    CompatibilityCase.POTENTIAL_OVERABUNDANCE: "#67a9cf",
    CompatibilityCase.GUARANTEED_OVERABUNDANCE: "#2166ac",
    CompatibilityCase.POTENTIAL_LACK_AND_OVERABUNDANCE: "#8073ac",
}


def _finite_hi(k: Interval, fallback: int) -> int:
    return k.hi if k.bounded else fallback


def classification_figure(
    rows: Sequence[tuple[str, Interval, Interval, CompatibilityCase]],
    figure_path: pathlib.Path,
) -> None:
    """One row per flow: sender output interval above receiver input interval.

    Unbounded maxima are drawn up to one step past the largest finite bound
    and marked with an arrow.
    """
    finite = [v for _, s, r, _ in rows for v in (s.lo, r.lo, s.hi, r.hi) if isinstance(v, int)]
    top = (max(finite) if finite else 1) + 2

    fig, ax = plt.subplots(figsize=(8, 0.8 + 0.7 * max(len(rows), 1)))
    for row, (name, sent, wanted, case) in enumerate(rows):
        y = len(rows) - 1 - row
        color = _CASE_COLORS[case]
        for offset, k, style in ((0.15, sent, "-"), (-0.15, wanted, "--")):
            hi = _finite_hi(k, top)
            ax.plot([k.lo, hi], [y + offset] * 2, style, color=color, linewidth=4,
                    marker="|", markersize=12, solid_capstyle="butt")
            if not k.bounded:
                ax.annotate("", xy=(top + 0.5, y + offset), xytext=(hi, y + offset),
                            arrowprops={"arrowstyle": "->", "color": color})
        ax.text(top + 0.8, y, f"{case.letter}  {case.label}", va="center", fontsize="small")
    ax.set_yticks(range(len(rows)))
    ax.set_yticklabels([r[0] for r in reversed(rows)])
    ax.set_xlim(-0.5, top + 10)
    ax.set_xlabel("instances per invocation (solid: sender output, dashed: receiver input)")
    ax.grid(axis="x", alpha=0.3)
    fig.tight_layout()
    figure_path = pathlib.Path(figure_path)
    figure_path.parent.mkdir(parents=True, exist_ok=True)
    log.debug("saving figure to %s", figure_path)
    fig.savefig(figure_path)
    plt.close(fig)


def simulation_figure(
    delivered: dict[str, list[int]],
    failures: dict[str, int],
    figure_path: pathlib.Path,
) -> None:
    """Histogram of delivered element counts per flow over all runs."""
    names = list(delivered) or ["(no flows)"]
    fig, axes = plt.subplots(len(names), 1, figsize=(6, 2.2 * len(names)), squeeze=False)
    for ax, name in zip(axes[:, 0], names):
        counts = delivered.get(name, [])
        if counts:
            lo, hi = min(counts), max(counts)
            ax.hist(counts, bins=range(lo, hi + 2), align="left", rwidth=0.8, color="#4d9221")
        ax.set_title(f"{name}  (failed runs: {failures.get(name, 0)})", fontsize="medium")
        ax.set_ylabel("runs")
    axes[-1, 0].set_xlabel("elements delivered")
    fig.tight_layout()
    figure_path = pathlib.Path(figure_path)
    figure_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(figure_path)
    plt.close(fig)
