"""Shared fixtures and the acceptance-summary reporter."""

import numpy as np
import pytest

_acceptance_lines = []


def record_acceptance(line):
    """Register a one-line acceptance verdict, echoed in the terminal summary."""
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)
