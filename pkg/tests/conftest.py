from __future__ import annotations

import sys

import pytest

from vsdsp.benchmarks import goldstein_problem, rosenbrock_problem


@pytest.fixture(scope="session")
def goldstein():
    return goldstein_problem()


@pytest.fixture(scope="session")
def rosenbrock():
    return rosenbrock_problem()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
