"""Figure rendering for the report path.

Everything here is presentation-only: the delimited outputs are the data
contract, the PNGs are rendered alongside them when --plot is requested.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .analysis import QuantileHeatmap  # noqa: E402
from .batchsim import ThroughputRow  # noqa: E402
from .curve import CurvePoint  # noqa: E402

FAMILY_COLORS = {"threshold": "tab:blue", "oracle": "tab:green", "random": "tab:red"}


def _save(fig, path: str | Path) -> None:
    fig.savefig(Path(path), dpi=150, bbox_inches="tight")
    plt.close(fig)


def tradeoff_figure(
    curves: dict[str, Sequence[CurvePoint]],
    path: str | Path,
    *,
    title: str = "performance vs. inference speedup",
    tier2_performance: float | None = None,
) -> None:
    """Performance against speedup, one line per policy family.

    When tier2_performance is given, dashed/dotted reference lines mark 99%
    and 98% of it.
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for family, points in curves.items():
        xs = [pt.speedup for pt in points]
        ys = [pt.performance for pt in points]
        ax.plot(xs, ys, marker=".", markersize=3, linewidth=1.2,
                color=FAMILY_COLORS.get(family), label=family)
    if tier2_performance is not None:
        ax.axhline(0.99 * tier2_performance, linestyle="--", linewidth=0.8, color="gray",
                   label="99% of tier-2")
        ax.axhline(0.98 * tier2_performance, linestyle=":", linewidth=0.8, color="gray",
                   label="98% of tier-2")
    ax.set_xlabel("speedup vs. tier-2 only")
    ax.set_ylabel("performance")
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    _save(fig, path)


def throughput_figure(
    rows: Sequence[ThroughputRow],
    performances: Sequence[float],
    path: str | Path,
    *,
    title: str = "throughput vs. performance",
) -> None:
    """Batch-size-1 vs optimized-batch throughput at matched thresholds (log y)."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(performances, [r.throughput_bs1_per_s for r in rows], marker="o",
            markersize=3, linewidth=1.2, color="tab:green", label="batch size 1")
    ax.plot(performances, [r.throughput_opt_per_s for r in rows], marker="o",
            markersize=3, linewidth=1.2, color="tab:blue", label="optimized batch size")
    ax.set_yscale("log")
    ax.set_xlabel("performance")
    ax.set_ylabel("instances / s")
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, which="both")
    _save(fig, path)


def heatmap_figure(hm: QuantileHeatmap, path: str | Path, *, title: str = "prediction flips by confidence quantile") -> None:
    """F-T / T-F fractions per tier-1 confidence quantile, annotated like a heatmap."""
    rows = [
        ("population", [q.population_fraction for q in hm.quantiles]),
        ("F-T", [q.ft_fraction for q in hm.quantiles]),
        ("T-F", [q.tf_fraction for q in hm.quantiles]),
    ]
    data = [values for _, values in rows]
    fig, ax = plt.subplots(figsize=(1.2 + 0.9 * hm.num_quantiles, 2.8))
    im = ax.imshow(data, cmap="Blues", aspect="auto", vmin=0.0)
    ax.set_xticks(range(hm.num_quantiles), [f"q{j + 1}" for j in range(hm.num_quantiles)])
    ax.set_yticks(
        range(3),
        [
            "population",
            f"F-T ({hm.ft_total:.1%})",
            f"T-F ({hm.tf_total:.1%})",
        ],
    )
    vmax = max(max(values) for _, values in rows) or 1.0
    for i, (_, values) in enumerate(rows):
        for j, v in enumerate(values):
            color = "white" if v > 0.6 * vmax else "black"
            ax.text(j, i, f"{v:.1%}", ha="center", va="center", fontsize=8, color=color)
    ax.set_title(title, fontsize=10)
    fig.colorbar(im, ax=ax, fraction=0.04)
    _save(fig, path)
