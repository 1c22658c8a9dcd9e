import numpy as np
import pytest

from steprl.core import State, Step, Trajectory


def make_trajectory(task=0, actions=(0, 1, 2), reward=1.0):
    steps = []
    history = ()
    for t, a in enumerate(actions):
        state = State(task=task, history=history, observation=100 + t)
        steps.append(Step(state, a))
        history = history + ((a, 100 + t),)
    return Trajectory(task=task, steps=tuple(steps), reward=reward)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
