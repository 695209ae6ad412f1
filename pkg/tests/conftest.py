import numpy as np
import pytest

from mmcache.config import SystemParams


@pytest.fixture
def params():
    return SystemParams(xi=0.4, cache_size=200, delta=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_KEY = pytest.StashKey[list]()


class Verdict:
    """PASS/FAIL lines for acceptance criteria, shown in the terminal summary."""

    def __init__(self, lines: list):
        self.lines = lines
        self.failed = []

    def __call__(self, label: str, passed: bool, detail: str):
        line = f"{'PASS' if passed else 'FAIL'}  {label}: {detail}"
        self.lines.append(line)
        print(line)
        if not passed:
            self.failed.append(line)

    def done(self):
        assert not self.failed, "; ".join(self.failed)


@pytest.fixture
def verdict(request):
    return Verdict(request.config.stash.setdefault(ACCEPTANCE_KEY, []))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
