"""Tabular softmax policy and a clipped group-relative policy-gradient update.

The policy stores one logit vector per state fingerprint. A fingerprint is the
``State`` itself (task, truncated history, observation), so the history caps
used when building samples decide which situations share parameters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Optional, Protocol, Sequence

import numpy as np

from .core import Action, State, StepSample


class Policy(Protocol):
    n_actions: int

    def sample_action(self, state: State, temperature: float, rng: np.random.Generator) -> Action: ...

    def action_log_prob(self, state: State, action: Action, temperature: float = 1.0) -> float: ...


def softmax(logits: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    z = logits / temperature
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


@dataclass
class UpdateConfig:
    learning_rate: float = 0.1
    clip_epsilon: float = 0.2
    temperature_train: float = 0.7
    temperature_eval: float = 0.0
    kl_coefficient: float = 0.001
    minibatch_size: float = 256
    epochs: int = 1

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < self.clip_epsilon < 1.0:
            raise ValueError("clip_epsilon must lie in (0, 1)")
        if self.temperature_train <= 0:
            raise ValueError("training temperature must be positive")
        if self.temperature_eval < 0:
            raise ValueError("evaluation temperature must be non-negative")
        if self.kl_coefficient < 0:
            raise ValueError("kl_coefficient must be non-negative")
        if self.minibatch_size <= 0 or self.epochs < 1:
            raise ValueError("minibatch_size and epochs must be positive")


@dataclass
class UpdateStats:
    mean_ratio: float = 0.0
    clipped_fraction: float = 0.0
    mean_kl: float = 0.0
    n_samples: int = 0
    n_minibatches: int = 0


class TabularSoftmaxPolicy:
    """Softmax over ``n_actions`` per state; unseen states are uniform."""

    def __init__(self, n_actions: int, logits: Optional[dict[State, np.ndarray]] = None):
        if n_actions < 2:
            raise ValueError("need at least two actions")
        self.n_actions = n_actions
        self.table: dict[State, np.ndarray] = {} if logits is None else logits
        self._zeros = np.zeros(n_actions)

    def logits(self, state: State) -> np.ndarray:
        return self.table.get(state, self._zeros)

    def probs(self, state: State, temperature: float = 1.0) -> np.ndarray:
        if temperature <= 0:
            p = np.zeros(self.n_actions)
            p[int(np.argmax(self.logits(state)))] = 1.0
            return p
        return softmax(self.logits(state), temperature)

    def sample_action(self, state: State, temperature: float, rng: np.random.Generator) -> Action:
        z = self.logits(state)
        if temperature <= 0:
            return int(np.argmax(z))  # first maximum wins ties
        cdf = np.cumsum(softmax(z, temperature))
        idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        return min(idx, self.n_actions - 1)

    def action_log_prob(self, state: State, action: Action, temperature: float = 1.0) -> float:
        z = self.logits(state) / temperature
        m = z.max()
        return float(z[action] - m - math.log(np.exp(z - m).sum()))

    def snapshot(self) -> "TabularSoftmaxPolicy":
        return TabularSoftmaxPolicy(self.n_actions, {k: v.copy() for k, v in self.table.items()})

    # checkpoints: one JSON record per fingerprint

    def save(self, fh: IO[str]) -> None:
        fh.write(json.dumps({"n_actions": self.n_actions}) + "\n")
        for state in sorted(self.table, key=_state_sort_key):
            rec = {"state": state.to_record(), "logits": self.table[state].tolist()}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")

    @classmethod
    def load(cls, fh: IO[str]) -> "TabularSoftmaxPolicy":
        header = json.loads(fh.readline())
        pol = cls(int(header["n_actions"]))
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                pol.table[State.from_record(rec["state"])] = np.asarray(rec["logits"], dtype=float)
        return pol


def _state_sort_key(s: State):
    return (s.task, s.observation, repr(s.history))


def _log(p: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(p, 1e-300))


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.sum(p * (_log(p) - _log(q))))


def surrogate_objective(
    policy: TabularSoftmaxPolicy,
    samples: Sequence[StepSample],
    old_policy: TabularSoftmaxPolicy,
    config: UpdateConfig,
    clip: bool = True,
) -> float:
    """Weighted mean of the clipped surrogate minus the KL penalty to ``old_policy``."""
    tau, eps, beta = config.temperature_train, config.clip_epsilon, config.kl_coefficient
    total_w = sum(s.weight for s in samples)
    if total_w <= 0:
        return 0.0
    acc = 0.0
    for s in samples:
        p = policy.probs(s.state, tau)
        q = old_policy.probs(s.state, tau)
        r = p[s.action] / q[s.action]
        A = s.advantage
        surr = min(r * A, min(max(r, 1 - eps), 1 + eps) * A) if clip else r * A
        acc += s.weight * (surr - beta * _kl(p, q))
    return acc / total_w


def surrogate_gradient(
    policy: TabularSoftmaxPolicy,
    samples: Sequence[StepSample],
    old_policy: TabularSoftmaxPolicy,
    config: UpdateConfig,
    clip: bool = True,
) -> tuple[dict[State, np.ndarray], UpdateStats]:
    """Analytic gradient of :func:`surrogate_objective` with respect to the logits."""
    tau, eps, beta = config.temperature_train, config.clip_epsilon, config.kl_coefficient
    grads: dict[State, np.ndarray] = {}
    total_w = sum(s.weight for s in samples)
    stats = UpdateStats(n_samples=len(samples))
    if total_w <= 0 or not samples:
        return grads, stats
    ratios, clipped, kls = [], 0, []
    for s in samples:
        p = policy.probs(s.state, tau)
        q = old_policy.probs(s.state, tau)
        a, A = s.action, s.advantage
        r = p[a] / q[a]
        kl = _kl(p, q)
        ratios.append(r)
        kls.append(kl)
        g = grads.get(s.state)
        if g is None:
            g = grads[s.state] = np.zeros(policy.n_actions)
        w = s.weight / total_w
        is_clipped = clip and ((A > 0 and r > 1 + eps) or (A < 0 and r < 1 - eps))
        if is_clipped:
            clipped += 1
        elif A != 0.0:
            dlogp = -p / tau
            dlogp[a] += 1.0 / tau
            g += w * A * r * dlogp
        if beta > 0:
            g -= w * beta * p * (_log(p) - _log(q) - kl) / tau
    stats.mean_ratio = float(np.mean(ratios))
    stats.clipped_fraction = clipped / len(samples)
    stats.mean_kl = float(np.mean(kls))
    return grads, stats


def make_minibatches(samples: Sequence[StepSample], size: float) -> list[list[StepSample]]:
    """Consecutive chunks whose total sample weight does not exceed ``size``."""
    batches: list[list[StepSample]] = []
    cur: list[StepSample] = []
    acc = 0.0
    for s in samples:
        if cur and acc + s.weight > size + 1e-9:
            batches.append(cur)
            cur, acc = [], 0.0
        cur.append(s)
        acc += s.weight
    if cur:
        batches.append(cur)
    return batches


def update(
    policy: TabularSoftmaxPolicy,
    samples: Sequence[StepSample],
    old_policy: TabularSoftmaxPolicy,
    config: UpdateConfig,
) -> UpdateStats:
    """Gradient ascent on the clipped surrogate, one step per minibatch."""
    if not samples:
        return UpdateStats()
    for s in samples:
        if not math.isfinite(s.advantage):
            raise ValueError("non-finite advantage in update batch")
    batches = make_minibatches(samples, config.minibatch_size)
    ratios, clipped, kls, n = [], [], [], 0
    for _ in range(config.epochs):
        for batch in batches:
            grads, st = surrogate_gradient(policy, batch, old_policy, config)
            for state, g in grads.items():
                if not g.any():
                    continue
                cur = policy.table.get(state)
                if cur is None:
                    cur = policy.table[state] = np.zeros(policy.n_actions)
                cur += config.learning_rate * g
            ratios.append(st.mean_ratio * len(batch))
            clipped.append(st.clipped_fraction * len(batch))
            kls.append(st.mean_kl * len(batch))
            n += len(batch)
    return UpdateStats(
        mean_ratio=sum(ratios) / n,
        clipped_fraction=sum(clipped) / n,
        mean_kl=sum(kls) / n,
        n_samples=len(samples),
        n_minibatches=len(batches) * config.epochs,
    )
