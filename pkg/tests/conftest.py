"""Shared fixtures and the acceptance-summary hook.

Oracles and corpus builders live in evalhelpers.py; importing them from a
uniquely named module keeps test imports unambiguous when several suites
run in one pytest invocation.
"""

from __future__ import annotations

import pytest

import evalhelpers
from evalhelpers import make_abx_corpus, make_toy_corpus


def pytest_terminal_summary(terminalreporter):
    if evalhelpers.acceptance_lines:
        terminalreporter.section("acceptance")
        for line in evalhelpers.acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def abx_corpus_separable(tmp_path_factory):
    return make_abx_corpus(tmp_path_factory.mktemp("abx_sep"), kind="separable")


@pytest.fixture(scope="session")
def abx_corpus_noise(tmp_path_factory):
    return make_abx_corpus(tmp_path_factory.mktemp("abx_noise"), kind="noise")


@pytest.fixture(scope="session")
def toy_corpus(tmp_path_factory):
    return make_toy_corpus(tmp_path_factory.mktemp("toy"))
