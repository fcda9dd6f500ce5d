from functools import lru_cache

import pytest

from illiquid_fp import ModelParams, Truncation, build_full, build_truncated


@lru_cache(maxsize=None)
def truncated(sigma, epsilon, eta, N, K, bits=256):
    return build_truncated(ModelParams(sigma, epsilon, eta), Truncation(N, K, bits))


@lru_cache(maxsize=None)
def full(sigma, epsilon, eta, N, bits=256):
    return build_full(ModelParams(sigma, epsilon, eta), Truncation(N, 1, bits))


@pytest.fixture
def tables():
    class T:
        pass
    t = T()
    t.truncated = truncated
    t.full = full
    return t


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
