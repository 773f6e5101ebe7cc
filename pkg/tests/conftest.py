import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_sym(rng, n, low=None, high=None):
    """Symmetric matrix; with bounds, its spectrum is drawn from [low, high]."""
    if low is None:
        m = rng.normal(size=(n, n))
        return 0.5 * (m + m.T)
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    m = (q * rng.uniform(low, high, size=n)) @ q.T
    return 0.5 * (m + m.T)


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: criterion(number, title, passed, detail)."""
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    def record(number, title, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2} {title}: {detail}"
        lines.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
