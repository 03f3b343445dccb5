import re

import pytest

from mangled_worlds.branching import binomial_ensemble


@pytest.fixture(scope="session")
def bg_10k_07():
    return binomial_ensemble(10_000, 0.7)


@pytest.fixture(scope="session")
def bg_20k_07():
    return binomial_ensemble(20_000, 0.7)


@pytest.fixture(scope="session")
def bg_40k_07():
    return binomial_ensemble(40_000, 0.7)


_criteria = {}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    n = int(re.search(r"test_criterion_(\d+)", report.nodeid).group(1))
    detail = dict(report.user_properties).get("detail", "")
    if report.failed and not detail:
        detail = report.longrepr.reprcrash.message if hasattr(report.longrepr, "reprcrash") else "error"
    _criteria[n] = (report.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        ok, detail = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
