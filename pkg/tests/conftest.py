import numpy as np
import pytest

_AC_LINES = pytest.StashKey[list]()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.stash[_AC_LINES] = []


@pytest.fixture
def ac_report(pytestconfig):
    """Record ``(criterion, ok, detail)``; the lines are printed in the terminal summary."""

    def record(label: str, ok: bool, detail: str = "") -> bool:
        line = f"{label}: {'PASS' if ok else 'FAIL'}" + (f"  ({detail})" if detail else "")
        pytestconfig.stash[_AC_LINES].append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_AC_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split("-")[1])):
            terminalreporter.write_line(line)
