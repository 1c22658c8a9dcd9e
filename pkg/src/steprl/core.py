"""Domain types shared by every component.

A state bundles the task, the interaction history and the current observation.
Observations and actions are opaque integer tokens; the synthetic environment
decides what they mean.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Any, Iterable, Iterator, Optional

TaskId = int
Action = int

# One history entry. Either side is None once truncation has dropped it.
HistoryEntry = tuple[Optional[int], Optional[int]]


@dataclass(frozen=True)
class State:
    task: TaskId
    history: tuple[HistoryEntry, ...]
    observation: int

    def to_record(self) -> dict[str, Any]:
        return {
            "task": self.task,
            "history": [list(h) for h in self.history],
            "observation": self.observation,
        }

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> "State":
        return cls(
            task=int(rec["task"]),
            history=tuple((h[0], h[1]) for h in rec["history"]),
            observation=int(rec["observation"]),
        )


@dataclass(frozen=True)
class Step:
    state: State
    action: Action


@dataclass(frozen=True)
class Trajectory:
    """A finished episode: ordered (state, action) steps and the terminal reward."""

    task: TaskId
    steps: tuple[Step, ...]
    reward: float

    def __post_init__(self):
        if not self.steps:
            raise ValueError("trajectory must contain at least one step")
        for s in self.steps:
            if s.state.task != self.task:
                raise ValueError("step state belongs to a different task")

    @property
    def length(self) -> int:
        return len(self.steps)

    @property
    def success(self) -> bool:
        return self.reward > 0

    def to_record(self) -> dict[str, Any]:
        return {
            "task": self.task,
            "reward": self.reward,
            "length": self.length,
            "steps": [{"state": s.state.to_record(), "action": s.action} for s in self.steps],
        }

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> "Trajectory":
        steps = tuple(
            Step(State.from_record(s["state"]), int(s["action"])) for s in rec["steps"]
        )
        return cls(task=int(rec["task"]), steps=steps, reward=float(rec["reward"]))


@dataclass(frozen=True)
class StepSample:
    """One training sample: a (possibly truncated) state, its action and advantage.

    ``weight`` scales the sample inside the loss average; trajectory-level
    training uses ``1 / T`` so a whole trajectory counts as one sample.
    """

    state: State
    action: Action
    advantage: float
    source_task: TaskId
    source_success_rate: float
    weight: float = field(default=1.0)

    def to_record(self) -> dict[str, Any]:
        return {
            "state": self.state.to_record(),
            "action": self.action,
            "advantage": self.advantage,
            "source_task": self.source_task,
            "source_success_rate": self.source_success_rate,
            "weight": self.weight,
        }

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> "StepSample":
        return cls(
            state=State.from_record(rec["state"]),
            action=int(rec["action"]),
            advantage=float(rec["advantage"]),
            source_task=int(rec["source_task"]),
            source_success_rate=float(rec["source_success_rate"]),
            weight=float(rec.get("weight", 1.0)),
        )


def truncate_history(state: State, t_r: Optional[int], t_I: Optional[int]) -> State:
    """Keep the last ``t_r`` responses and last ``t_I`` past observations.

    ``None`` means no cap. Entries left with neither side are dropped.
    """
    if (t_r is not None and t_r < 0) or (t_I is not None and t_I < 0):
        raise ValueError("history caps must be non-negative")
    n = len(state.history)
    if n == 0:
        return state
    kept: list[HistoryEntry] = []
    for i, (resp, obs) in enumerate(state.history):
        age = n - i  # 1 for the most recent entry
        r = resp if (t_r is None or age <= t_r) else None
        o = obs if (t_I is None or age <= t_I) else None
        if r is not None or o is not None:
            kept.append((r, o))
    kept_t = tuple(kept)
    if kept_t == state.history:
        return state
    return State(task=state.task, history=kept_t, observation=state.observation)


def write_jsonl(fh: IO[str], records: Iterable[dict[str, Any]]) -> None:
    for rec in records:
        fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")))
        fh.write("\n")


def read_jsonl(fh: IO[str]) -> Iterator[dict[str, Any]]:
    for line in fh:
        line = line.strip()
        if line:
            yield json.loads(line)
