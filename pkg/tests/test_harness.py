import json

import numpy as np
import pytest

from steprl.allocator import allocate_uniform
from steprl.core import Step, Trajectory
from steprl.envsim import SyntheticEnv, SyntheticTaskSpec, default_suite
from steprl.harness import Experiment, RunConfig, load_config, run_experiment
from steprl.harness.cli import main
from steprl.harness.metrics import metric_high_success_fraction, metric_tasks_above
from steprl.tracker import init_table, update_round


def small(**kw):
    base = dict(n_tasks=8, batch_tasks=4, rounds=3, lengths=(1, 2, 3))
    base.update(kw)
    return RunConfig(**base)


def table_with(rates, N=16):
    t = init_table(range(len(rates)), N, 0.6)
    return update_round(t, {i: (N * 10, round(r * N * 10)) for i, r in enumerate(rates)})


# metrics

def test_tasks_above_examples():
    assert metric_tasks_above(init_table(range(5), 16, 0.6), 0.6) == 0
    assert metric_tasks_above(table_with([1.0] * 4), 0.6) == 4
    assert metric_tasks_above(table_with([0.6125, 0.6, 0.2]), 0.6) == 1
    with pytest.raises(ValueError):
        metric_tasks_above(table_with([0.5]), 1.5)


def test_high_success_fraction_examples():
    zeros = table_with([0.0, 0.0])
    plans = [allocate_uniform([0, 1], 16) for _ in range(8)]
    assert metric_high_success_fraction(plans, [zeros] * 8, 4) == [0.0, 0.0]
    ones = table_with([1.0, 1.0])
    assert metric_high_success_fraction(plans, [ones] * 8, 4) == [1.0, 1.0]
    mixed = table_with([0.9, 0.1] * 8)
    plans = [allocate_uniform(list(range(16)), 16) for _ in range(4)]
    assert metric_high_success_fraction(plans, [mixed] * 4, 4) == [pytest.approx(0.5)]


def test_high_success_fraction_partial_window_and_validation():
    t = table_with([1.0, 0.0])
    plans = [allocate_uniform([0], 2), allocate_uniform([1], 2), allocate_uniform([0], 2)]
    assert metric_high_success_fraction(plans, [t] * 3, 2) == [0.5, 1.0]
    with pytest.raises(ValueError):
        metric_high_success_fraction(plans, [t] * 3, 0)
    with pytest.raises(ValueError):
        metric_high_success_fraction(plans, [t] * 2, 2)


# round orchestration

def test_tgrpo_all_failures_leave_policy_unchanged():
    suite = [SyntheticTaskSpec.from_seed(i, 8, 5, 0, seed=i) for i in range(4)]
    exp = Experiment(small(method="tgrpo", n_tasks=4), suite)
    rep = exp.run_round()
    assert rep.successes == 0 and rep.step_samples > 0
    assert exp.policy.table == {}


def test_step_on_mastered_corpus_has_no_signal():
    suite = [SyntheticTaskSpec(i, (i % 5,), 5) for i in range(4)]
    exp = Experiment(small(method="step", n_tasks=4, s_init=1.0), suite)
    rep = exp.run_round()
    assert rep.successes > 0 and rep.aug_groups == 0 and rep.replaced_slots == 0
    assert all(s.advantage == 0.0 for s in exp.last_samples)
    assert exp.policy.table == {}


def _episode(env, spec, actions):
    ep, state = env.reset(spec)
    steps = []
    for a in actions:
        steps.append(Step(state, a))
        ep, state, done, r = env.step(ep, a)
    return Trajectory(spec.task, tuple(steps), r)


def test_step_augmentation_sample_count():
    spec = SyntheticTaskSpec(0, (1, 2, 3, 4), 5)
    exp = Experiment(small(method="step", n_tasks=1, batch_tasks=1, N=16), [spec])
    env = SyntheticEnv()
    trajs = [_episode(env, spec, [1, 2, 3, 4])] + [_episode(env, spec, [0])] * 15
    pre = update_round(exp.table, {0: (16, 1)})  # s_hat = 1/16, below s_low
    base = exp.training_samples(trajs, pre)
    assert len(base) == 4 and all(s.advantage == pytest.approx(15 / 16) for s in base)
    before = exp.env.interaction_count
    samples, aug = exp.augment_samples(base, exp.policy.snapshot())
    assert aug.groups == 4 and aug.inference_calls == 28 and aug.env_steps == 0
    assert len(samples) == 4 + 28
    assert exp.env.interaction_count == before


def test_step_no_both_differs_from_gigrpo_only_in_filter_and_weight():
    spec = SyntheticTaskSpec(0, (1, 2), 5)
    env = SyntheticEnv()
    trajs = [_episode(env, spec, [1, 2]), _episode(env, spec, [1, 0]), _episode(env, spec, [3])]
    gi = Experiment(small(method="gigrpo", n_tasks=1, batch_tasks=1), [spec])
    nb = Experiment(small(method="step_no_both", n_tasks=1, batch_tasks=1), [spec])
    pre = update_round(gi.table, {0: (16, 4)})
    g_samples = gi.training_samples(trajs, pre)
    n_samples = nb.training_samples(trajs, pre)
    assert len(g_samples) == 5
    assert [(s.state, s.action) for s in n_samples] == [(s.state, s.action) for s in g_samples[:2]]
    assert all(s.advantage == pytest.approx(0.75) for s in n_samples)


def test_tgrpo_uses_full_history_and_trajectory_weights():
    spec = SyntheticTaskSpec(0, (1, 2, 3, 4, 0), 5)
    env = SyntheticEnv()
    trajs = [_episode(env, spec, [1, 2, 3, 4, 0]), _episode(env, spec, [2])]
    exp = Experiment(small(method="tgrpo", n_tasks=1, batch_tasks=1), [spec])
    samples = exp.training_samples(trajs, exp.table)
    assert len(samples) == 6
    assert samples[4].state == trajs[0].steps[4].state
    assert [s.weight for s in samples] == [0.2] * 5 + [1.0]


def test_budget_conservation_and_round_robin():
    for method in ("tgrpo", "gigrpo", "step", "step_no_srsampling", "step_no_stepaug", "step_no_both"):
        exp = Experiment(small(method=method, rounds=4))
        seen = []
        for _ in range(4):
            rep = exp.run_round()
            assert rep.trajectories == 4 * 16 == len(exp.plans[-1].slots)
            assert rep.aug_env_steps == 0
            seen.extend(rep.batch)
        assert sorted(seen) == sorted(list(range(8)) * 2)


def test_rounds_zero_summary():
    s = run_experiment(small(rounds=0))
    assert s.rounds == 0 and s.env_steps == 0 and s.inference_calls == 0
    assert s.auc_tasks_above_60 == 0.0


def test_default_rounds():
    assert RunConfig().resolved_rounds(64) == 32
    assert RunConfig(batch_tasks=10).resolved_rounds(64) == 56


def test_logs_are_deterministic(tmp_path):
    for d in ("a", "b"):
        run_experiment(small(out=str(tmp_path / d), log_trajectories=True))
    for name in ("metrics.jsonl", "allocations.jsonl", "summary.json", "trajectories.jsonl", "policy.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = [json.loads(x) for x in (tmp_path / "a" / "metrics.jsonl").read_text().splitlines()]
    assert [r["round"] for r in rows] == [0, 1, 2]
    assert rows[-1]["eval_success"] is not None


def test_threaded_collection_matches_serial(tmp_path):
    run_experiment(small(method="step", out=str(tmp_path / "serial")))
    run_experiment(small(method="step", out=str(tmp_path / "threads"), workers=4))
    for name in ("metrics.jsonl", "allocations.jsonl"):
        assert (tmp_path / "serial" / name).read_bytes() == (tmp_path / "threads" / name).read_bytes()


def test_priors_shape_initial_policy():
    exp = Experiment(small(method="step", length_priors={1: 3.0}))
    greedy = exp.evaluate()
    for task, spec in exp.specs.items():
        if spec.length == 1:
            assert greedy[task] == 1.0


def test_greedy_evaluation_is_deterministic():
    exp = Experiment(small())
    for _ in range(3):
        exp.run_round()
    assert exp.evaluate() == exp.evaluate()


# configuration

@pytest.mark.parametrize("kw", [dict(method="ppo"), dict(N=1), dict(method="step", N=3), dict(s0=1.0),
                                dict(s_low=1.5), dict(kappa=0), dict(t_r=-1), dict(rounds=-1),
                                dict(learning_rate=0), dict(cache_weighting="x")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        RunConfig(**kw)


def test_load_config_precedence(tmp_path, monkeypatch):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"method": "gigrpo", "seed": 3, "rounds": 2}))
    assert load_config(p).seed == 3
    monkeypatch.setenv("STEPRL_SEED", "9")
    monkeypatch.setenv("STEPRL_OUT", str(tmp_path / "o"))
    cfg = load_config(p)
    assert cfg.seed == 9 and cfg.out == str(tmp_path / "o")
    assert load_config(p, seed=11).seed == 11


def test_load_config_yaml_and_unknown_fields(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("method: step\nN: 8\nlength_priors: {2: 1.5}\n")
    cfg = load_config(p)
    assert cfg.N == 8 and cfg.length_priors == {2: 1.5}
    p.write_text("bogus: 1\n")
    with pytest.raises(ValueError):
        load_config(p)


def test_config_roundtrip():
    cfg = RunConfig(length_priors={2: 3.0}, lengths=(2, 3))
    assert RunConfig(**json.loads(json.dumps(cfg.to_dict()))) == cfg


# command line

def test_cli_run_and_report(tmp_path, capsys):
    cfg = tmp_path / "step.json"
    cfg.write_text(json.dumps(small(method="step").to_dict()))
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--seed", "2", "--rounds", "2", "--out", str(out), "--figures"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["seed"] == 2 and summary["rounds"] == 2
    assert (out / "report" / "tasks_above_60.png").stat().st_size > 0
    assert main(["report", "--runs", str(out), "--out", str(tmp_path / "rep")]) == 0
    header = (tmp_path / "rep" / "curves.tsv").read_text().splitlines()[0].split("\t")
    assert header[:3] == ["label", "round", "seeds"]


def test_cli_compare(tmp_path):
    paths = []
    for m in ("tgrpo", "step"):
        p = tmp_path / f"{m}.json"
        p.write_text(json.dumps({"method": m, "n_tasks": 4, "batch_tasks": 2, "lengths": [1, 2]}))
        paths.append(str(p))
    out = tmp_path / "cmp"
    assert main(["compare", "--configs", *paths, "--seeds", "0", "1", "--rounds", "2", "--out", str(out)]) == 0
    rows = (out / "report" / "summary.tsv").read_text().splitlines()
    assert len(rows) == 1 + 4
    for fig in ("tasks_above_60.png", "high_success_fraction.png"):
        assert (out / "report" / fig).exists()


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"method": "nope"}))
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 1
    with pytest.raises(SystemExit):
        main(["run", "--method", "nope"])


def test_cli_suite(tmp_path):
    out = tmp_path / "suite.json"
    assert main(["suite", "--out", str(out), "--tasks", "5", "--prior", "2=1.5"]) == 0
    tasks = json.loads(out.read_text())["tasks"]
    assert len(tasks) == 5 and tasks[0]["prior"] == 1.5
