"""Prediction-error analysis over tier-1 confidence quantiles.

Records are ranked by tier-1 confidence (ascending, ties by id) and split
into contiguous quantile groups of near-equal size. Per quantile we report
the fraction of the whole test set that lands there, the fraction whose
tier-1 error is corrected by tier-2 (F-T), and the fraction whose correct
tier-1 prediction is overturned by tier-2 (T-F).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError
from .trace import Trace


@dataclass(frozen=True)
class QuantileRow:
    population_fraction: float
    ft_fraction: float
    tf_fraction: float


@dataclass(frozen=True)
class QuantileHeatmap:
    num_quantiles: int
    quantiles: tuple[QuantileRow, ...]
    ft_total: float
    tf_total: float


def heatmap(trace: Trace, num_quantiles: int = 5) -> QuantileHeatmap:
    """F-T / T-F rates per confidence quantile; fractions are of the whole set.

    ft_total and tf_total are computed from the global counts, so they are
    exactly invariant under the choice of num_quantiles.
    """
    if num_quantiles < 1:
        raise ValidationError(f"num_quantiles must be >= 1, got {num_quantiles}")
    for rec in trace:
        if rec.gold_label is None:
            raise ValidationError(f"heatmap needs gold labels; record {rec.id!r} has none")

    n = len(trace)
    ranked = sorted(trace, key=lambda r: (r.tier1_confidence, r.id))

    base, extra = divmod(n, num_quantiles)
    rows: list[QuantileRow] = []
    ft_count = tf_count = 0
    pos = 0
    for q in range(num_quantiles):
        size = base + (1 if q < extra else 0)
        group = ranked[pos : pos + size]
        pos += size
        ft = sum(1 for r in group if r.tier1_pred != r.gold_label and r.tier2_pred == r.gold_label)
        tf = sum(1 for r in group if r.tier1_pred == r.gold_label and r.tier2_pred != r.gold_label)
        ft_count += ft
        tf_count += tf
        rows.append(
            QuantileRow(
                population_fraction=size / n,
                ft_fraction=ft / n,
                tf_fraction=tf / n,
            )
        )
    return QuantileHeatmap(
        num_quantiles=num_quantiles,
        quantiles=tuple(rows),
        ft_total=ft_count / n,
        tf_total=tf_count / n,
    )


def heatmap_to_csv(hm: QuantileHeatmap) -> str:
    """Plot-ready table: one column per quantile, rows population / F-T / T-F."""
    header = "row," + ",".join(f"q{j + 1}" for j in range(hm.num_quantiles)) + ",total"
    pop = "population," + ",".join(f"{r.population_fraction:.3f}" for r in hm.quantiles) + ",1.000"
    ft = "F-T," + ",".join(f"{r.ft_fraction:.3f}" for r in hm.quantiles) + f",{hm.ft_total:.3f}"
    tf = "T-F," + ",".join(f"{r.tf_fraction:.3f}" for r in hm.quantiles) + f",{hm.tf_total:.3f}"
    return "\n".join([header, pop, ft, tf]) + "\n"


def write_heatmap_csv(hm: QuantileHeatmap, path: str | Path) -> None:
    Path(path).write_text(heatmap_to_csv(hm), encoding="utf-8")
