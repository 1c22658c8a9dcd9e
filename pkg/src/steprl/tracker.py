"""Per-task success-rate record and the task cache derived from it."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping

from .core import TaskId


@dataclass(frozen=True)
class TaskRecord:
    task: TaskId
    s_hat: float
    n_sampled: int = 0
    n_success: int = 0


@dataclass(frozen=True)
class SuccessRateTable:
    records: Mapping[TaskId, TaskRecord]
    round: int
    group_size: int
    s0: float

    @property
    def task_ids(self) -> list[TaskId]:
        return sorted(self.records)

    def s_hat(self, task: TaskId) -> float:
        return self.records[task].s_hat

    def snapshot(self) -> list[dict]:
        """Per-task rows for the metrics log."""
        return [
            {"task": r.task, "s_hat": r.s_hat, "n": r.n_sampled, "u": r.n_success}
            for r in (self.records[t] for t in self.task_ids)
        ]


def init_table(task_ids: Iterable[TaskId], N: int, s0: float, s_init: float = 0.0) -> SuccessRateTable:
    ids = list(task_ids)
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate task ids")
    if not 0.0 <= s_init <= 1.0:
        raise ValueError(f"s_init must lie in [0, 1], got {s_init}")
    if N < 2:
        raise ValueError("group size N must be at least 2")
    if not 0.0 < s0 < 1.0:
        raise ValueError(f"s0 must lie in (0, 1), got {s0}")
    records = {t: TaskRecord(task=t, s_hat=float(s_init)) for t in ids}
    return SuccessRateTable(records=records, round=0, group_size=N, s0=s0)


def smoothed_rate(prior: float, n_sampled: int, n_success: int, N: int) -> float:
    """Blend this round's counts with the prior estimate.

    The prior is treated as if it came from ``N`` trajectories and is
    discounted by ``alpha = 1 - n_sampled / N`` (zero once a full group of
    ``N`` or more was collected).
    """
    if n_sampled == 0:
        return prior  # exact; the general form can be off by one ulp here
    alpha = 1.0 - n_sampled / N if n_sampled < N else 0.0
    return (n_success + alpha * prior * N) / (n_sampled + alpha * N)


def update_round(
    table: SuccessRateTable, counts: Mapping[TaskId, tuple[int, int]]
) -> SuccessRateTable:
    """Return a new table with every record refreshed from ``counts``.

    ``counts`` maps task -> (collected, successful) for this round. Tasks
    missing from it were not sampled and keep their estimate.
    """
    for task, (n, u) in counts.items():
        if task not in table.records:
            raise KeyError(f"unknown task {task}")
        if n < 0 or u < 0:
            raise ValueError(f"negative counts for task {task}")
        if u > n:
            raise ValueError(f"task {task}: {u} successes out of {n} trajectories")

    N = table.group_size
    new = {}
    for task, rec in table.records.items():
        n, u = counts.get(task, (0, 0))
        new[task] = TaskRecord(
            task=task,
            s_hat=smoothed_rate(rec.s_hat, n, u, N),
            n_sampled=n,
            n_success=u,
        )
    return replace(table, records=new, round=table.round + 1)


def cache(table: SuccessRateTable) -> list[TaskId]:
    """Tasks with an intermediate estimate, ``0 < s_hat < s0``, by ascending id."""
    return [t for t in table.task_ids if 0.0 < table.records[t].s_hat < table.s0]
