import os

import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile("default", max_examples=60, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

from ordpick.polysys import parse_infix, parse_problem  # noqa: E402

REFERENCE_LINE = "[[((1,0,0),235),((0,2,0),42)],[((2,0,1),2),((0,0,0),-1)]]"


@pytest.fixture
def reference_system():
    return parse_problem(REFERENCE_LINE)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def infix(text, names="x1 x2 x3"):
    return parse_infix(text, names.split())


ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, ok, detail)``; prints it and fails on ``not ok``."""
    lines = request.config.stash[ACCEPTANCE]

    def record(n: int, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {detail}"
        lines[n] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
