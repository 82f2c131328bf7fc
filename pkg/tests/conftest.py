import os

import numpy as np
import pytest

from bayesexact.tables import ContingencyTable

DEATH_PENALTY = [[[19, 132], [11, 52]], [[0, 9], [6, 97]]]
JOB_SATISFACTION = [[1, 3, 10, 6], [2, 3, 10, 7], [1, 6, 14, 12], [0, 1, 9, 11]]

_CRITERIA = []


def pytest_addoption(parser):
    parser.addoption("--full-scale", action="store_true", default=False,
                     help="run acceptance checks at the published sample sizes (slow)")


def full_scale_enabled(config) -> bool:
    return config.getoption("--full-scale") or os.environ.get("BAYESEXACT_FULL_SCALE") == "1"


def pytest_collection_modifyitems(config, items):
    if full_scale_enabled(config):
        return
    skip = pytest.mark.skip(reason="needs --full-scale or BAYESEXACT_FULL_SCALE=1")
    for item in items:
        if "full_scale" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for line in _CRITERIA:
        terminalreporter.write_line(line)


@pytest.fixture
def record():
    """Record one acceptance check; returns whether it passed."""

    def _record(criterion, label, observed, target=None, tol=None, passed=None):
        if passed is None and target is None:
            status, passed = "INFO", True
        else:
            if passed is None:
                passed = abs(observed - target) <= tol
            status = "PASS" if passed else "FAIL"
        want = "" if target is None else f" (target {target} +/- {tol})" if tol else f" (target {target})"
        line = f"[{status}] criterion {criterion}: {label} = {observed}{want}"
        _CRITERIA.append(line)
        print(line)
        return passed

    return _record


@pytest.fixture(scope="session")
def death_penalty():
    return ContingencyTable(np.array(DEATH_PENALTY))


@pytest.fixture(scope="session")
def job_satisfaction():
    return ContingencyTable(np.array(JOB_SATISFACTION))
