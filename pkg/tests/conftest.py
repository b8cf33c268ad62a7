from __future__ import annotations

import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

import pytest

_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def report_criterion(request):
    """Record one acceptance line; the terminal summary lists them in order."""
    lines = request.config.stash.setdefault(_CRITERIA, {})

    def report(k: int, ok: bool, detail: str) -> bool:
        line = f"CRITERION {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines[k] = line
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
