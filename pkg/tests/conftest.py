import numpy as np
import pytest

_ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def record(request):
    """``record(number, passed, detail)`` files one acceptance line."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def _record(number, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        line = f"criterion {number}: {status}  {detail}".rstrip()
        lines[number] = line
        print(line)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines, key=str):
        terminalreporter.write_line(lines[key])
