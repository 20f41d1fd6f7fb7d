"""Shared pytest plumbing: the acceptance-criteria summary report.

Acceptance tests record one line each through the ``record`` fixture; the
terminal-summary hook prints every recorded line after the run so the
pass/fail status of each criterion is visible in plain ``pytest`` output.
"""

import re

import pytest

_CRITERIA = {}


def _natural_key(name):
    match = re.match(r"([A-Za-z]+)(\d+)", name)
    if match:
        return (match.group(1), int(match.group(2)))
    return (name, 0)


@pytest.fixture
def record():
    """Record a criterion outcome for the end-of-run summary block."""

    def _record(name, passed, detail):
        _CRITERIA[name] = (bool(passed), str(detail))

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name in sorted(_CRITERIA, key=_natural_key):
        passed, detail = _CRITERIA[name]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{name}: {verdict} ({detail})")
