"""Round orchestration for all methods.

One round: allocate slots, roll out every slot under a frozen policy snapshot,
refresh the success-rate table, turn trajectories into training samples
(method dependent), optionally augment low-success steps, then update the
policy. Every random draw comes from a generator seeded by
``(seed, round, stream, index)`` so serial and threaded collection agree.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from ..advantage import TrajectoryGroup, decompose, sr_weighted_advantage, tgrpo_advantages
from ..allocator import AllocationPlan, allocate, allocate_uniform
from ..augment import build_group, env_interaction_count, group_samples, select_for_augmentation
from ..core import Step, StepSample, Trajectory, truncate_history, write_jsonl
from ..envsim import SyntheticEnv, SyntheticTaskSpec, default_suite, load_suite, target_path_states
from ..policy import TabularSoftmaxPolicy, update
from ..tracker import SuccessRateTable, cache, init_table, update_round
from .config import RunConfig
from .metrics import high_success_share, metric_tasks_above

log = logging.getLogger(__name__)

STREAM_ROLLOUT, STREAM_ALLOC, STREAM_AUG, STREAM_EVAL = range(4)


def _rng(seed: int, round_idx: int, stream: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed, round_idx, stream, index])


def rollout(
    env: SyntheticEnv,
    spec: SyntheticTaskSpec,
    policy: TabularSoftmaxPolicy,
    temperature: float,
    rng: np.random.Generator,
    t_r: Optional[int],
    t_I: Optional[int],
) -> Trajectory:
    """Play one episode; the policy sees the history truncated to ``t_r``/``t_I``."""
    ep, state = env.reset(spec)
    steps = []
    reward = 0.0
    while True:
        action = policy.sample_action(truncate_history(state, t_r, t_I), temperature, rng)
        steps.append(Step(state, action))
        ep, state, done, reward = env.step(ep, action)
        if done:
            break
    return Trajectory(task=spec.task, steps=tuple(steps), reward=reward)


@dataclass
class RoundReport:
    round: int
    method: str
    batch: list[int]
    tasks: list[dict]
    tasks_above_60: int
    mean_s_hat: float
    high_success_fraction: float
    high_success_fraction_successful: float
    trajectories: int
    successes: int
    replaced_slots: int
    cache_size: int
    env_steps: int
    inference_calls: int
    aug_groups: int = 0
    aug_inert_groups: int = 0
    aug_inference_calls: int = 0
    aug_env_steps: int = 0
    step_samples: int = 0
    mean_ratio: float = 0.0
    clipped_fraction: float = 0.0
    mean_kl: float = 0.0
    eval_success: Optional[float] = None
    eval_tasks_above_60: Optional[int] = None

    def to_record(self) -> dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class AugStats:
    groups: int = 0
    inert_groups: int = 0
    inference_calls: int = 0
    env_steps: int = 0


@dataclass
class Summary:
    method: str
    seed: int
    rounds: int
    final_s_hat: dict[int, float] = field(default_factory=dict)
    final_tasks_above_60: int = 0
    final_mean_s_hat: float = 0.0
    final_eval_success: Optional[float] = None
    auc_tasks_above_60: float = 0.0
    env_steps: int = 0
    inference_calls: int = 0
    aug_env_steps: int = 0

    def to_record(self) -> dict[str, Any]:
        d = dict(self.__dict__)
        d["final_s_hat"] = [{"task": k, "s_hat": v} for k, v in sorted(self.final_s_hat.items())]
        return d


class Experiment:
    """Mutable run state: suite, environment, policy, tracker table and histories."""

    def __init__(self, config: RunConfig, specs: Optional[Sequence[SyntheticTaskSpec]] = None):
        self.config = config
        if specs is None:
            specs = load_suite(config.suite) if config.suite else default_suite(
                config.n_tasks, config.lengths, config.n_actions, config.tolerance,
                config.suite_seed, config.length_priors)
        self.specs = {s.task: s for s in specs}
        self.task_ids = sorted(self.specs)
        alphabet = {s.n_actions for s in specs}
        if len(alphabet) != 1:
            raise ValueError("all tasks in a suite must share one action alphabet")
        self.env = SyntheticEnv()
        self.policy = TabularSoftmaxPolicy(alphabet.pop())
        self._apply_priors()
        self.table = init_table(self.task_ids, config.N, config.s0, config.s_init)
        self.update_config = config.update_config()
        self.round = 0
        self.inference_calls = 0
        self.plans: list[AllocationPlan] = []
        self.pre_tables: list[SuccessRateTable] = []
        self.reports: list[RoundReport] = []
        self.last_trajectories: list[Trajectory] = []
        self.last_samples: list[StepSample] = []

    def _apply_priors(self) -> None:
        t_r, t_I = self.caps
        scratch = SyntheticEnv(self.env.observe_mistakes)
        for task in self.task_ids:
            spec = self.specs[task]
            if not spec.prior:
                continue
            for state, a in zip(target_path_states(scratch, spec), spec.target):
                key = truncate_history(state, t_r, t_I)
                z = self.policy.table.setdefault(key, np.zeros(self.policy.n_actions))
                z[a] += spec.prior

    # history caps used by the policy for this method
    @property
    def caps(self) -> tuple[Optional[int], Optional[int]]:
        if self.config.method_spec.step_level:
            return self.config.t_r, self.config.t_I
        return None, None

    def batch_for_round(self, r: int) -> list[int]:
        """Round-robin slice of ``batch_tasks`` tasks."""
        n, b = len(self.task_ids), min(self.config.batch_tasks, len(self.task_ids))
        start = (r * b) % n
        return [self.task_ids[(start + i) % n] for i in range(b)]

    def _collect(self, plan: AllocationPlan, snapshot: TabularSoftmaxPolicy) -> list[Trajectory]:
        cfg = self.config
        t_r, t_I = self.caps

        def one(i: int) -> Trajectory:
            spec = self.specs[plan.slots[i].assigned]
            return rollout(self.env, spec, snapshot, cfg.temperature_train,
                           _rng(cfg.seed, self.round, STREAM_ROLLOUT, i), t_r, t_I)

        idx = range(len(plan.slots))
        if cfg.workers > 1:
            with ThreadPoolExecutor(cfg.workers) as pool:
                return list(pool.map(one, idx))
        return [one(i) for i in idx]

    def training_samples(self, trajs: list[Trajectory], pre: SuccessRateTable) -> list[StepSample]:
        cfg, ms = self.config, self.config.method_spec
        t_r, t_I = self.caps
        samples: list[StepSample] = []
        if ms.sr_advantage:
            for tr in trajs:
                if not tr.success:
                    continue
                s_hat = pre.s_hat(tr.task)
                samples.extend(decompose(tr, sr_weighted_advantage(tr, s_hat), t_r, t_I, s_hat))
            return samples
        groups: dict[int, list[Trajectory]] = defaultdict(list)
        for tr in trajs:
            groups[tr.task].append(tr)
        for task in sorted(groups):
            members = groups[task]
            if len(members) < 2:
                continue
            advs = tgrpo_advantages(TrajectoryGroup(task, tuple(members)))
            for tr, adv in zip(members, advs):
                weight = 1.0 if ms.step_level else 1.0 / tr.length
                samples.extend(decompose(tr, adv, t_r, t_I, pre.s_hat(task), weight))
        return samples

    def augment_samples(self, samples: list[StepSample],
                        snapshot: TabularSoftmaxPolicy) -> tuple[list[StepSample], "AugStats"]:
        """Replace each selected low-success step by its augmentation group."""
        cfg = self.config
        selected = select_for_augmentation(samples, cfg.s_low)
        if cfg.max_aug_groups is not None:
            selected = selected[:cfg.max_aug_groups]
        chosen = {id(s) for s in selected}
        stats = AugStats()
        env_before = self.env.interaction_count
        out: list[StepSample] = []
        for s in samples:
            if id(s) not in chosen:
                out.append(s)
                continue
            g = build_group(s, snapshot, cfg.N, _rng(cfg.seed, self.round, STREAM_AUG, stats.groups),
                            cfg.temperature_train)
            stats.groups += 1
            stats.inert_groups += int(g.inert)
            stats.inference_calls += g.n_generated
            stats.env_steps += env_interaction_count(g)
            out.extend(group_samples(g))
        stats.env_steps += self.env.interaction_count - env_before
        return out, stats

    def evaluate(self) -> dict[int, float]:
        """Success rate per task at the evaluation temperature, on a private env."""
        cfg = self.config
        env = SyntheticEnv()
        t_r, t_I = self.caps
        episodes = 1 if cfg.temperature_eval <= 0 else cfg.eval_episodes
        out = {}
        for task in self.task_ids:
            wins = 0
            for e in range(episodes):
                tr = rollout(env, self.specs[task], self.policy, cfg.temperature_eval,
                             _rng(cfg.seed, self.round, STREAM_EVAL, task * episodes + e), t_r, t_I)
                wins += tr.success
            out[task] = wins / episodes
        return out

    def run_round(self) -> RoundReport:
        cfg, ms = self.config, self.config.method_spec
        r = self.round
        pre = self.table
        batch = self.batch_for_round(r)
        c = cache(pre)
        if ms.sr_sampling:
            plan = allocate(batch, pre, c, cfg.N, _rng(cfg.seed, r, STREAM_ALLOC), cfg.kappa,
                            cfg.cache_weighting, round=r)
        else:
            plan = allocate_uniform(batch, cfg.N, round=r)

        snapshot = self.policy.snapshot()
        env_before = self.env.interaction_count
        trajs = self._collect(plan, snapshot)
        env_steps = self.env.interaction_count - env_before
        rollout_calls = sum(t.length for t in trajs)

        counts: dict[int, list[int]] = defaultdict(lambda: [0, 0])
        for tr in trajs:
            counts[tr.task][0] += 1
            counts[tr.task][1] += int(tr.success)
        self.table = update_round(pre, {t: (n, u) for t, (n, u) in counts.items()})

        hs = cfg.high_success_threshold
        succ = [tr for tr in trajs if tr.success]
        report = RoundReport(
            round=r,
            method=cfg.method,
            batch=batch,
            tasks=self.table.snapshot(),
            tasks_above_60=metric_tasks_above(self.table, cfg.report_threshold),
            mean_s_hat=float(np.mean([self.table.s_hat(t) for t in self.task_ids])),
            high_success_fraction=high_success_share(plan, pre, hs),
            high_success_fraction_successful=(
                sum(pre.s_hat(t.task) >= hs for t in succ) / len(succ) if succ else 0.0),
            trajectories=len(trajs),
            successes=len(succ),
            replaced_slots=sum(s.replaced for s in plan.slots),
            cache_size=len(c),
            env_steps=env_steps,
            inference_calls=rollout_calls,
        )

        samples = self.training_samples(trajs, pre)
        if ms.step_aug:
            samples, aug = self.augment_samples(samples, snapshot)
            report.aug_groups = aug.groups
            report.aug_inert_groups = aug.inert_groups
            report.aug_inference_calls = aug.inference_calls
            report.aug_env_steps = aug.env_steps
        report.inference_calls += report.aug_inference_calls
        report.step_samples = len(samples)
        stats = update(self.policy, samples, snapshot, self.update_config)
        report.mean_ratio = stats.mean_ratio
        report.clipped_fraction = stats.clipped_fraction
        report.mean_kl = stats.mean_kl

        self.round += 1
        if self.round % cfg.eval_every == 0 or self.round == self.total_rounds:
            ev = self.evaluate()
            report.eval_success = float(np.mean(list(ev.values())))
            report.eval_tasks_above_60 = sum(1 for v in ev.values() if v > cfg.report_threshold)

        self.inference_calls += report.inference_calls
        self.plans.append(plan)
        self.pre_tables.append(pre)
        self.reports.append(report)
        self.last_trajectories = trajs
        self.last_samples = samples
        return report

    @property
    def total_rounds(self) -> int:
        return self.config.resolved_rounds(len(self.task_ids))

    def summary(self) -> Summary:
        reps = self.reports
        final_eval = next((r.eval_success for r in reversed(reps) if r.eval_success is not None), None)
        return Summary(
            method=self.config.method,
            seed=self.config.seed,
            rounds=len(reps),
            final_s_hat={t: self.table.s_hat(t) for t in self.task_ids},
            final_tasks_above_60=metric_tasks_above(self.table, self.config.report_threshold),
            final_mean_s_hat=float(np.mean([self.table.s_hat(t) for t in self.task_ids])),
            final_eval_success=final_eval,
            auc_tasks_above_60=float(sum(r.tasks_above_60 for r in reps)),
            env_steps=sum(r.env_steps for r in reps),
            inference_calls=sum(r.inference_calls for r in reps),
            aug_env_steps=sum(r.aug_env_steps for r in reps),
        )


def run_experiment(config: RunConfig, specs: Optional[Sequence[SyntheticTaskSpec]] = None) -> Summary:
    """Run every round; with ``config.out`` set, stream logs there.

    Files written: ``config.json``, ``metrics.jsonl`` (one round per line),
    ``allocations.jsonl``, ``summary.json``, ``policy.jsonl`` and, when
    enabled, ``trajectories.jsonl``.
    """
    exp = Experiment(config, specs)
    out = Path(config.out) if config.out else None
    files = {}
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(config.to_dict(), sort_keys=True, indent=1) + "\n")
        files["metrics"] = open(out / "metrics.jsonl", "w")
        files["alloc"] = open(out / "allocations.jsonl", "w")
        if config.log_trajectories:
            files["traj"] = open(out / "trajectories.jsonl", "w")
    try:
        for _ in range(exp.total_rounds):
            rep = exp.run_round()
            log.info("round %d %s: above60=%d successes=%d samples=%d", rep.round, config.method,
                     rep.tasks_above_60, rep.successes, rep.step_samples)
            if files:
                write_jsonl(files["metrics"], [rep.to_record()])
                write_jsonl(files["alloc"], [exp.plans[-1].to_record()])
                if "traj" in files:
                    write_jsonl(files["traj"], (dict(t.to_record(), round=rep.round)
                                                for t in exp.last_trajectories))
                for fh in files.values():
                    fh.flush()
    finally:
        for fh in files.values():
            fh.close()
    summary = exp.summary()
    if out is not None:
        (out / "summary.json").write_text(json.dumps(summary.to_record(), sort_keys=True, indent=1) + "\n")
        with open(out / "policy.jsonl", "w") as fh:
            exp.policy.save(fh)
    return summary
