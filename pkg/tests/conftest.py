import pytest
from hypothesis import settings

from kfopc.harness.experiments import experiment_broadband, experiment_real_path, experiment_tonal_saturation

settings.register_profile("default", deadline=None)
settings.load_profile("default")

REAL_PATH_SEEDS = range(5)

acceptance_key = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[acceptance_key] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(acceptance_key, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        ok, title, detail = results[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {detail}")


@pytest.fixture
def acceptance(request):
    """Record one criterion's verdict and print it; returns ``record(n, title, ok, detail)``."""
    results = request.config.stash[acceptance_key]

    def record(number, title, ok, detail):
        results[number] = (bool(ok), title, detail)
        print(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {detail}")
        assert ok, f"criterion {number} ({title}) failed: {detail}"

    return record


@pytest.fixture(scope="session")
def tonal_runs():
    return experiment_tonal_saturation()


@pytest.fixture(scope="session")
def broadband_runs():
    return experiment_broadband()


@pytest.fixture(scope="session")
def real_path_runs():
    return {seed: experiment_real_path(seed=seed) for seed in REAL_PATH_SEEDS}
