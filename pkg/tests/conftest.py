import os

import numpy as np
import pytest

from linattack.datasets import istanbul_or_synthetic, make_rng, synthetic_regression
from linattack.regress import fit_ols


@pytest.fixture(scope="session")
def istanbul():
    data, _ = istanbul_or_synthetic(os.environ.get("ISTANBUL_CSV"))
    return data


@pytest.fixture(scope="session")
def istanbul_fit(istanbul):
    return fit_ols(istanbul)


@pytest.fixture
def rng():
    return make_rng(12345)


@pytest.fixture(scope="session")
def small_fits():
    return [fit_ols(synthetic_regression(n=40, m=2 + (s % 2), seed=s)) for s in range(6)]



def pytest_configure(config):
    config._criteria = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert."""
    def record(num, ok, detail):
        line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config._criteria.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criteria", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
