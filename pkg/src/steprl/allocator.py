"""Sampling-budget allocation: uniform expansion and success-rate guided replacement."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import TaskId
from .tracker import SuccessRateTable


@dataclass(frozen=True)
class Slot:
    origin: TaskId
    assigned: TaskId
    replaced: bool


@dataclass(frozen=True)
class AllocationPlan:
    slots: tuple[Slot, ...]
    round: int = 0

    def assigned_tasks(self) -> list[TaskId]:
        return [s.assigned for s in self.slots]

    def to_record(self) -> dict:
        return {
            "round": self.round,
            "origin": [s.origin for s in self.slots],
            "assigned": [s.assigned for s in self.slots],
            "replaced": [s.replaced for s in self.slots],
        }


def replacement_probability(s_hat: float, kappa: float, s0: float) -> float:
    """Logistic replacement probability centred on ``s0`` with sharpness ``kappa``."""
    z = -kappa * (s_hat - s0)
    # numerically stable logistic
    if z >= 0:
        return 1.0 / (1.0 + math.exp(z))
    e = math.exp(-z)
    return e / (e + 1.0)


def allocate(
    tasks: Sequence[TaskId],
    table: SuccessRateTable,
    cache: Sequence[TaskId],
    N: int,
    rng: np.random.Generator,
    kappa: float = 10.0,
    cache_weighting: str = "uniform",
    round: int = 0,
) -> AllocationPlan:
    """Expand each task into ``N`` copies and replace some of copies 1..N-1.

    Copy 0 always keeps its origin task. Each remaining copy is replaced with
    probability ``replacement_probability(s_hat)`` by a task drawn from
    ``cache``; with an empty cache nothing is replaced.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    if not tasks:
        raise ValueError("no tasks to allocate")
    pool = list(cache)
    weights = None
    if pool and cache_weighting == "inverse":
        w = np.array([1.0 - table.s_hat(t) for t in pool])
        weights = w / w.sum()
    elif cache_weighting not in ("uniform", "inverse"):
        raise ValueError(f"unknown cache weighting {cache_weighting!r}")

    slots: list[Slot] = []
    for task in tasks:
        p = replacement_probability(table.s_hat(task), kappa, table.s0)
        draws = rng.random(N - 1) < p
        picks = rng.choice(len(pool), size=N - 1, p=weights) if pool else None
        slots.append(Slot(task, task, False))
        for j in range(N - 1):
            if draws[j] and pool:
                slots.append(Slot(task, pool[int(picks[j])], True))
            else:
                slots.append(Slot(task, task, False))
    return AllocationPlan(slots=tuple(slots), round=round)


def allocate_uniform(tasks: Sequence[TaskId], N: int, round: int = 0) -> AllocationPlan:
    if N < 1:
        raise ValueError("N must be at least 1")
    slots = tuple(Slot(t, t, False) for t in tasks for _ in range(N))
    return AllocationPlan(slots=slots, round=round)
