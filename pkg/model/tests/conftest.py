"""Directory-level setup: skip the whole suite when the package is not
installed, and print recorded acceptance lines after the run."""

from __future__ import annotations

import pytest

pytest.importorskip("artinet")

import nethelpers  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if nethelpers.acceptance_lines:
        terminalreporter.section("acceptance")
        for line in nethelpers.acceptance_lines:
            terminalreporter.write_line(line)
