"""Step-level group augmentation.

A selected step sample is expanded into a group: the original action plus
``N/2 - 1`` alternatives drawn from the policy at the same state. Candidates
that match the original action get reward 1, the rest 0, and the rewards are
normalised within the group. Only policy inference is spent; the environment
is never touched.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .advantage import combine_final, group_normalize
from .core import Action, StepSample
from .policy import Policy

Matcher = Callable[[Action, Action], bool]


@dataclass(frozen=True)
class AugmentationGroup:
    reference: StepSample
    actions: tuple[Action, ...]
    rewards: tuple[float, ...]
    advantages: tuple[float, ...] = field(default=())

    @property
    def size(self) -> int:
        return len(self.actions)

    @property
    def n_generated(self) -> int:
        return max(len(self.actions) - 1, 0)

    @property
    def inert(self) -> bool:
        return len(set(self.rewards)) <= 1


def candidates_per_group(N: int) -> int:
    """Alternatives generated per reference step; ``floor(N/2) - 1``, at least 1."""
    return max(N // 2 - 1, 1)


def select_for_augmentation(samples: Sequence[StepSample], s_low: float) -> list[StepSample]:
    return [s for s in samples if s.source_success_rate <= s_low]


def build_group(
    reference: StepSample,
    policy: Policy,
    N: int,
    rng: np.random.Generator,
    temperature: float = 0.7,
    matcher: Matcher = operator.eq,
) -> AugmentationGroup:
    if N < 4:
        raise ValueError("augmentation needs N >= 4")
    n = candidates_per_group(N)
    generated = [policy.sample_action(reference.state, temperature, rng) for _ in range(n)]
    actions = (reference.action, *generated)
    rewards = tuple(1.0 if matcher(a, reference.action) else 0.0 for a in actions)
    group = AugmentationGroup(reference, actions, rewards)
    return AugmentationGroup(reference, actions, rewards, tuple(aug_advantages(group)))


def aug_advantages(group: AugmentationGroup) -> list[float]:
    return group_normalize(group.rewards)


def group_samples(group: AugmentationGroup) -> list[StepSample]:
    """Training samples replacing the reference: one per group member."""
    ref = group.reference
    advs = group.advantages or tuple(aug_advantages(group))
    return [
        StepSample(
            state=ref.state,
            action=a,
            advantage=combine_final(ref.advantage, adv),
            source_task=ref.source_task,
            source_success_rate=ref.source_success_rate,
            weight=ref.weight,
        )
        for a, adv in zip(group.actions, advs)
    ]


def env_interaction_count(group: AugmentationGroup) -> int:
    return 0
