from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("fracldg", max_examples=40, deadline=None)
settings.load_profile("fracldg")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_CRITERIA = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_CRITERIA] = []


@pytest.fixture
def criterion(request):
    """``criterion(n, ok, detail)`` records one acceptance line and returns *ok*."""

    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config.stash[_CRITERIA].append((n, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = sorted(config.stash.get(_CRITERIA, []))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in lines:
            terminalreporter.write_line(line)
