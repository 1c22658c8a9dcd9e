"""Run configuration: defaults, validation, file loading and env overrides."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

from ..policy import UpdateConfig

METHODS = ("tgrpo", "gigrpo", "step", "step_no_srsampling", "step_no_stepaug", "step_no_both")

ENV_SEED = "STEPRL_SEED"
ENV_OUT = "STEPRL_OUT"


@dataclass(frozen=True)
class MethodSpec:
    sr_sampling: bool
    sr_advantage: bool
    step_aug: bool
    step_level: bool  # False: one sample per trajectory over the full history


METHOD_SPECS = {
    "tgrpo": MethodSpec(False, False, False, False),
    "gigrpo": MethodSpec(False, False, False, True),
    "step": MethodSpec(True, True, True, True),
    "step_no_srsampling": MethodSpec(False, True, True, True),
    "step_no_stepaug": MethodSpec(True, True, False, True),
    "step_no_both": MethodSpec(False, True, False, True),
}


@dataclass
class RunConfig:
    method: str = "step"
    N: int = 16
    batch_tasks: int = 16
    rounds: Optional[int] = None  # None: 8 passes over the suite
    s0: float = 0.6
    s_low: float = 0.2
    kappa: float = 10.0
    s_init: float = 0.0
    t_r: Optional[int] = 3
    t_I: Optional[int] = 0
    seed: int = 0
    suite: Optional[str] = None  # task-suite file; None builds the default suite
    n_tasks: int = 64
    lengths: tuple[int, ...] = (2, 3, 4, 5, 6, 7, 8)
    n_actions: int = 5
    tolerance: int = 0
    suite_seed: int = 0
    length_priors: dict[int, float] = field(default_factory=dict)
    out: Optional[str] = None
    learning_rate: float = 10.0
    clip_epsilon: float = 0.2
    temperature_train: float = 0.7
    temperature_eval: float = 0.0
    kl_coefficient: float = 0.001
    minibatch_size: int = 256
    epochs: int = 1
    eval_every: int = 4
    eval_episodes: int = 1
    cache_weighting: str = "uniform"
    max_aug_groups: Optional[int] = None
    high_success_threshold: float = 0.8
    report_threshold: float = 0.6
    workers: int = 1
    log_trajectories: bool = False

    def __post_init__(self):
        self.lengths = tuple(int(x) for x in self.lengths)
        self.length_priors = {int(k): float(v) for k, v in self.length_priors.items()}
        self.validate()

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.N < 2:
            raise ValueError("N must be at least 2")
        if METHOD_SPECS[self.method].step_aug and self.N < 4:
            raise ValueError("step augmentation needs N >= 4")
        if self.batch_tasks < 1:
            raise ValueError("batch_tasks must be positive")
        if self.rounds is not None and self.rounds < 0:
            raise ValueError("rounds must be non-negative")
        if not 0.0 < self.s0 < 1.0:
            raise ValueError("s0 must lie in (0, 1)")
        if not 0.0 <= self.s_low <= 1.0:
            raise ValueError("s_low must lie in [0, 1]")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if not 0.0 <= self.s_init <= 1.0:
            raise ValueError("s_init must lie in [0, 1]")
        for name in ("t_r", "t_I"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.eval_every < 1 or self.eval_episodes < 1:
            raise ValueError("eval_every and eval_episodes must be positive")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if self.cache_weighting not in ("uniform", "inverse"):
            raise ValueError("cache_weighting must be 'uniform' or 'inverse'")
        self.update_config()

    @property
    def method_spec(self) -> MethodSpec:
        return METHOD_SPECS[self.method]

    def resolved_rounds(self, n_tasks: int) -> int:
        if self.rounds is not None:
            return self.rounds
        return 8 * max(1, -(-n_tasks // self.batch_tasks))

    def update_config(self) -> UpdateConfig:
        return UpdateConfig(
            learning_rate=self.learning_rate,
            clip_epsilon=self.clip_epsilon,
            temperature_train=self.temperature_train,
            temperature_eval=self.temperature_eval,
            kl_coefficient=self.kl_coefficient,
            minibatch_size=self.minibatch_size,
            epochs=self.epochs,
        )

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["lengths"] = list(self.lengths)
        d["length_priors"] = {str(k): v for k, v in sorted(self.length_priors.items())}
        return d

    def with_(self, **changes: Any) -> "RunConfig":
        d = self.to_dict()
        d.update(changes)
        return RunConfig(**d)


def load_config(path: str | Path | None = None, **overrides: Any) -> RunConfig:
    """Read a JSON/YAML config, then apply env-var and explicit overrides.

    Explicit overrides that are None are ignored.
    """
    data: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        text = path.read_text()
        if path.suffix in (".yaml", ".yml"):
            import yaml
            data = yaml.safe_load(text) or {}
        else:
            data = json.loads(text)
        if data.get("suite") and not Path(data["suite"]).is_absolute():
            data["suite"] = str(path.parent / data["suite"])
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config fields: {', '.join(sorted(unknown))}")
    if ENV_SEED in os.environ:
        data["seed"] = int(os.environ[ENV_SEED])
    if ENV_OUT in os.environ:
        data["out"] = os.environ[ENV_OUT]
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**data)
