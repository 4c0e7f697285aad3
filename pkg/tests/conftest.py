import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record one criterion; prints a PASS/FAIL line now and in the summary."""
    import time
    from contextlib import contextmanager

    @contextmanager
    def criterion(number: int, title: str):
        info = {}
        t0 = time.perf_counter()
        status = "FAIL"
        try:
            yield info
            status = "PASS"
        finally:
            took = time.perf_counter() - t0
            detail = ", ".join(f"{k}={v}" for k, v in info.items())
            line = f"[{status}] criterion {number}: {title} ({took:.2f} s) {detail}".rstrip()
            print(line)
            request.config.stash[ACCEPTANCE_KEY].append(line)

    return criterion


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
