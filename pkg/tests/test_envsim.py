import json

import pytest

from steprl.envsim import (
    SyntheticEnv, SyntheticTaskSpec, default_suite, interaction_counter, load_suite, save_suite,
    target_path_states,
)


def spec(target, tol=0, **kw):
    return SyntheticTaskSpec(0, tuple(target), 5, tol, **kw)


def play(env, sp, actions):
    ep, st = env.reset(sp)
    trace = []
    for a in actions:
        ep, st, done, r = env.step(ep, a)
        trace.append((done, r))
        if done:
            break
    return ep, trace


def test_reset():
    env = SyntheticEnv()
    ep, st = env.reset(spec([3]))
    assert ep.progress == 0 and ep.mistakes == 0 and st.history == ()
    ep, _, done, r = env.step(ep, 3)
    assert done and r == 1.0


def test_observation_deterministic_and_blind_to_mistakes():
    env = SyntheticEnv()
    sp = spec([1, 2], tol=2)
    ep0, s0 = env.reset(sp)
    ep1, s1, _, _ = env.step(ep0, 4)
    assert s1.observation == s0.observation  # same progress, mistake not observed
    assert SyntheticEnv(observe_mistakes=True).observation(ep1) != SyntheticEnv(True).observation(ep0)
    assert env.reset(sp)[1] == s0


def test_perfect_episode():
    ep, trace = play(SyntheticEnv(), spec([1, 2]), [1, 2])
    assert trace == [(False, 0.0), (True, 1.0)] and ep.success


def test_immediate_failure():
    ep, trace = play(SyntheticEnv(), spec([1, 2]), [0])
    assert trace == [(True, 0.0)] and not ep.success


def test_tolerance_trace():
    ep, trace = play(SyntheticEnv(), spec([1, 2, 3], tol=1), [0, 1, 2, 3])
    assert trace == [(False, 0.0)] * 3 + [(True, 1.0)]
    assert ep.turns == 4 and ep.success and ep.mistakes == 1


def test_step_cap():
    sp = spec([1, 2], tol=10)
    assert sp.max_turns == 6
    ep, trace = play(SyntheticEnv(), sp, [0] * 10)
    assert len(trace) == 6 and trace[-1] == (True, 0.0)


def test_finished_episode_cannot_step():
    env = SyntheticEnv()
    ep, _ = play(env, spec([1]), [1])
    with pytest.raises(RuntimeError):
        env.step(ep, 1)


def test_invalid_specs():
    with pytest.raises(ValueError):
        SyntheticTaskSpec(0, (), 5)
    with pytest.raises(ValueError):
        SyntheticTaskSpec(0, (5,), 5)
    with pytest.raises(ValueError):
        SyntheticTaskSpec(0, (0,), 1)
    with pytest.raises(ValueError):
        SyntheticTaskSpec(0, (0, 1, 2), 5, step_cap=2)


def test_counter():
    env = SyntheticEnv()
    assert interaction_counter(env) == 0
    play(env, spec([0, 1, 2, 3, 4]), [0, 1, 2, 3, 4])
    assert interaction_counter(env) == 5
    env = SyntheticEnv()
    sp = spec([0, 1, 2, 3])
    for _ in range(16):
        play(env, sp, [0, 1, 2, 3])
    assert interaction_counter(env) == 64


def test_target_always_succeeds():
    env = SyntheticEnv()
    for sp in default_suite():
        ep, trace = play(env, sp, sp.target)
        assert ep.success and trace[-1] == (True, 1.0)
        assert sum(r for _, r in trace) == 1.0
        assert len(target_path_states(SyntheticEnv(), sp)) == sp.length


def test_default_suite_shape():
    suite = default_suite()
    assert len(suite) == 64
    assert {s.length for s in suite} == set(range(2, 9))
    assert all(s.n_actions == 5 and s.tolerance == 0 for s in suite)
    assert default_suite() == suite


def test_suite_file_roundtrip(tmp_path):
    suite = default_suite(8, length_priors={2: 1.5})
    save_suite(suite, tmp_path / "s.json")
    assert load_suite(tmp_path / "s.json") == suite
    assert suite[0].prior == 1.5 and suite[1].prior == 0.0


def test_suite_from_seed_records(tmp_path):
    recs = {"tasks": [{"task": 0, "length": 3, "n_actions": 4, "tolerance": 1, "seed": 9},
                      {"task": 1, "length": 2, "n_actions": 4, "target": [3, 0]}]}
    (tmp_path / "s.json").write_text(json.dumps(recs))
    a, b = load_suite(tmp_path / "s.json")
    assert a.length == 3 and a.tolerance == 1 and a == SyntheticTaskSpec.from_seed(0, 3, 4, 1, 9)
    assert b.target == (3, 0)


def test_suite_rejects_duplicates(tmp_path):
    recs = [{"task": 0, "length": 1, "n_actions": 2, "seed": 1}] * 2
    (tmp_path / "s.json").write_text(json.dumps(recs))
    with pytest.raises(ValueError):
        load_suite(tmp_path / "s.json")
