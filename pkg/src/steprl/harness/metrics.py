"""Round-level metrics computed from allocation plans and tracker tables."""

from __future__ import annotations

from typing import Sequence

from ..allocator import AllocationPlan
from ..tracker import SuccessRateTable


def metric_tasks_above(table: SuccessRateTable, threshold: float) -> int:
    """Number of tasks whose estimate strictly exceeds ``threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return sum(1 for r in table.records.values() if r.s_hat > threshold)


def high_success_share(plan: AllocationPlan, table: SuccessRateTable, threshold: float = 0.8) -> float:
    """Share of the plan's slots whose assigned task has ``s_hat >= threshold`` in ``table``."""
    if not plan.slots:
        return 0.0
    hits = sum(1 for s in plan.slots if table.s_hat(s.assigned) >= threshold)
    return hits / len(plan.slots)


def metric_high_success_fraction(
    plans: Sequence[AllocationPlan],
    tables: Sequence[SuccessRateTable],
    window: int = 4,
    threshold: float = 0.8,
) -> list[float]:
    """Windowed share of collected trajectories coming from high-success tasks.

    ``tables[i]`` is the table in force when ``plans[i]`` was drawn. Slots are
    pooled within each window of ``window`` consecutive rounds; a trailing
    partial window is kept.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    if len(plans) != len(tables):
        raise ValueError("need one pre-round table per plan")
    out = []
    for start in range(0, len(plans), window):
        hits = total = 0
        for plan, table in zip(plans[start:start + window], tables[start:start + window]):
            hits += sum(1 for s in plan.slots if table.s_hat(s.assigned) >= threshold)
            total += len(plan.slots)
        out.append(hits / total if total else 0.0)
    return out


def window_means(values: Sequence[float], window: int) -> list[float]:
    return [
        sum(values[i:i + window]) / len(values[i:i + window])
        for i in range(0, len(values), window)
    ]
