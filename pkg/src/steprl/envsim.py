"""Synthetic multi-turn environment with sparse terminal reward.

A task is a hidden target sequence of ``L`` actions over an alphabet of ``A``
symbols. Each correct action advances progress by one; a wrong action counts
as a mistake. The episode succeeds (reward 1.0) when the whole sequence is
entered and fails (reward 0.0) after more than ``tolerance`` mistakes or when
the step cap runs out.

Task-suite files are JSON (or YAML) of the form::

    {"tasks": [{"task": 0, "length": 3, "n_actions": 5, "tolerance": 0, "seed": 17}, ...]}

``task``       integer id, unique within the suite
``length``     target sequence length L (>= 1)
``n_actions``  alphabet size A (>= 2)
``tolerance``  wrong actions allowed before forced failure (default 0)
``seed``       seed for drawing the target sequence uniformly from the alphabet
``target``     optional explicit target list; overrides ``seed``
``step_cap``   optional turn limit, default 2L + 2
``prior``      optional logit bonus the initial policy puts on each correct
               action along the target path (default 0, i.e. uniform); models
               tasks a pre-trained agent already handles
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .core import Action, State, TaskId

_MASK64 = (1 << 64) - 1


def _mix(x: int) -> int:
    # splitmix64 finaliser, folded to 31 bits
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & 0x7FFFFFFF


@dataclass(frozen=True)
class SyntheticTaskSpec:
    task: TaskId
    target: tuple[Action, ...]
    n_actions: int
    tolerance: int = 0
    step_cap: Optional[int] = None
    seed: Optional[int] = None
    prior: float = 0.0

    def __post_init__(self):
        if len(self.target) < 1:
            raise ValueError("target sequence must be non-empty")
        if self.n_actions < 2:
            raise ValueError("alphabet needs at least two actions")
        if any(not 0 <= a < self.n_actions for a in self.target):
            raise ValueError("target action outside the alphabet")
        if self.tolerance < 0:
            raise ValueError("tolerance must be non-negative")
        if self.step_cap is not None and self.step_cap < len(self.target):
            raise ValueError("step cap shorter than the target sequence")

    @property
    def length(self) -> int:
        return len(self.target)

    @property
    def max_turns(self) -> int:
        return self.step_cap if self.step_cap is not None else 2 * self.length + 2

    @classmethod
    def from_seed(cls, task: TaskId, length: int, n_actions: int, tolerance: int = 0,
                  seed: int = 0, step_cap: Optional[int] = None,
                  prior: float = 0.0) -> "SyntheticTaskSpec":
        rng = np.random.default_rng(seed)
        target = tuple(int(a) for a in rng.integers(n_actions, size=length))
        return cls(task, target, n_actions, tolerance, step_cap, seed, prior)

    def to_record(self) -> dict[str, Any]:
        rec: dict[str, Any] = {
            "task": self.task,
            "length": self.length,
            "n_actions": self.n_actions,
            "tolerance": self.tolerance,
            "target": list(self.target),
        }
        if self.seed is not None:
            rec["seed"] = self.seed
        if self.step_cap is not None:
            rec["step_cap"] = self.step_cap
        if self.prior:
            rec["prior"] = self.prior
        return rec

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> "SyntheticTaskSpec":
        step_cap = rec.get("step_cap")
        tol = int(rec.get("tolerance", 0))
        prior = float(rec.get("prior", 0.0))
        if "target" in rec:
            target = tuple(int(a) for a in rec["target"])
            if "length" in rec and int(rec["length"]) != len(target):
                raise ValueError(f"task {rec['task']}: length does not match target")
            return cls(int(rec["task"]), target, int(rec["n_actions"]), tol, step_cap,
                       rec.get("seed"), prior)
        return cls.from_seed(int(rec["task"]), int(rec["length"]), int(rec["n_actions"]),
                             tol, int(rec["seed"]), step_cap, prior)


@dataclass(frozen=True)
class EpisodeState:
    spec: SyntheticTaskSpec
    progress: int = 0
    mistakes: int = 0
    turns: int = 0
    done: bool = False
    success: bool = False
    history: tuple[tuple[int, int], ...] = ()


class SyntheticEnv:
    """Stateless transition function plus a thread-safe interaction counter."""

    def __init__(self, observe_mistakes: bool = False):
        self.observe_mistakes = observe_mistakes
        self._count = 0
        self._lock = threading.Lock()

    @property
    def interaction_count(self) -> int:
        return self._count

    def observation(self, ep: EpisodeState) -> int:
        key = (ep.spec.task << 20) ^ (ep.progress << 8)
        if self.observe_mistakes:
            key ^= ep.mistakes + 1
        return _mix(key)

    def _state(self, ep: EpisodeState) -> State:
        return State(task=ep.spec.task, history=ep.history, observation=self.observation(ep))

    def reset(self, spec: SyntheticTaskSpec) -> tuple[EpisodeState, State]:
        ep = EpisodeState(spec=spec)
        return ep, self._state(ep)

    def step(self, ep: EpisodeState, action: Action) -> tuple[EpisodeState, State, bool, float]:
        if ep.done:
            raise RuntimeError("episode already finished")
        spec = ep.spec
        if not 0 <= action < spec.n_actions:
            raise ValueError(f"action {action} outside alphabet of size {spec.n_actions}")
        with self._lock:
            self._count += 1
        obs = self.observation(ep)
        progress, mistakes = ep.progress, ep.mistakes
        if action == spec.target[progress]:
            progress += 1
        else:
            mistakes += 1
        turns = ep.turns + 1
        success = progress == spec.length
        done = success or mistakes > spec.tolerance or turns >= spec.max_turns
        nxt = replace(ep, progress=progress, mistakes=mistakes, turns=turns, done=done,
                      success=success, history=ep.history + ((int(action), obs),))
        reward = 1.0 if success else 0.0
        return nxt, self._state(nxt), done, reward


def interaction_counter(env: SyntheticEnv) -> int:
    return env.interaction_count


def default_suite(n_tasks: int = 64, lengths: Sequence[int] = range(2, 9), n_actions: int = 5,
                  tolerance: int = 0, seed: int = 0,
                  length_priors: Optional[Mapping[int, float]] = None) -> list[SyntheticTaskSpec]:
    """Tasks with lengths cycling through ``lengths`` and seeded random targets.

    ``length_priors`` maps a sequence length to the initial-policy bonus given
    to every task of that length.
    """
    length_priors = dict(length_priors or {})
    lengths = list(lengths)
    ss = np.random.SeedSequence(seed)
    seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(n_tasks)]
    specs = []
    for i in range(n_tasks):
        L = lengths[i % len(lengths)]
        specs.append(SyntheticTaskSpec.from_seed(
            i, L, n_actions, tolerance, seeds[i], prior=float(length_priors.get(L, 0.0))))
    return specs


def target_path_states(env: "SyntheticEnv", spec: SyntheticTaskSpec) -> list[State]:
    """States visited when the target sequence is played without mistakes."""
    ep, state = env.reset(spec)
    states = [state]
    for a in spec.target[:-1]:
        ep, state, _, _ = env.step(ep, a)
        states.append(state)
    return states


def load_suite(path: str | Path) -> list[SyntheticTaskSpec]:
    path = Path(path)
    text = path.read_text()
    if path.suffix in (".yaml", ".yml"):
        import yaml
        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    recs = data["tasks"] if isinstance(data, dict) else data
    specs = [SyntheticTaskSpec.from_record(r) for r in recs]
    ids = [s.task for s in specs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate task ids in suite")
    return specs


def save_suite(specs: Sequence[SyntheticTaskSpec], path: str | Path) -> None:
    Path(path).write_text(json.dumps({"tasks": [s.to_record() for s in specs]}, indent=1) + "\n")
