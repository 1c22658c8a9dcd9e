"""Trajectory and step advantages.

Group normalisation uses the population standard deviation. Groups whose
rewards are all equal carry no relative signal and get all-zero advantages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import StepSample, TaskId, Trajectory, truncate_history


@dataclass(frozen=True)
class TrajectoryGroup:
    task: TaskId
    trajectories: tuple[Trajectory, ...]

    def __post_init__(self):
        if not self.trajectories:
            raise ValueError("empty trajectory group")
        if any(t.task != self.task for t in self.trajectories):
            raise ValueError("trajectory group mixes tasks")


def group_normalize(rewards: Sequence[float]) -> list[float]:
    n = len(rewards)
    if n == 0:
        return []
    mean = math.fsum(rewards) / n
    var = math.fsum((r - mean) ** 2 for r in rewards) / n
    std = math.sqrt(var)
    if std == 0.0:
        return [0.0] * n
    return [(r - mean) / std for r in rewards]


def tgrpo_advantages(group: TrajectoryGroup) -> list[float]:
    if len(group.trajectories) < 2:
        raise ValueError("group normalisation needs at least two trajectories")
    return group_normalize([t.reward for t in group.trajectories])


def sr_weighted_advantage(trajectory: Trajectory, s_hat: float) -> float:
    """``(1 - s_hat) * reward``; only defined for successful trajectories."""
    if trajectory.reward <= 0:
        raise ValueError("success-rate weighted advantage needs a successful trajectory")
    if not 0.0 <= s_hat <= 1.0:
        raise ValueError(f"s_hat out of range: {s_hat}")
    return (1.0 - s_hat) * trajectory.reward


def decompose(
    trajectory: Trajectory,
    advantage: float,
    t_r: Optional[int],
    t_I: Optional[int],
    source_success_rate: float = 0.0,
    weight: float = 1.0,
) -> list[StepSample]:
    """Split a trajectory into per-step samples that all share ``advantage``."""
    return [
        StepSample(
            state=truncate_history(step.state, t_r, t_I),
            action=step.action,
            advantage=advantage,
            source_task=trajectory.task,
            source_success_rate=source_success_rate,
            weight=weight,
        )
        for step in trajectory.steps
    ]


def combine_final(base: float, aug: float) -> float:
    if base < 0:
        raise ValueError("base advantage must be non-negative")
    return base * aug
