import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pseudorot.circle import golden_mean

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=10,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def golden():
    return golden_mean()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = {}


@pytest.fixture(scope="session")
def acceptance(request):
    """Recorder for the acceptance gate: ``record(k, ok, detail)``."""
    log = request.config.stash[_ACCEPTANCE]

    def record(k: int, ok: bool, detail: str) -> bool:
        log[k] = (bool(ok), detail)
        print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(_ACCEPTANCE, {})
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, 9):
        ok, detail = log.get(k, (None, "not run or errored before recording"))
        status = "PASS" if ok else ("FAIL" if ok is False else "MISSING")
        terminalreporter.write_line(f"criterion {k}: {status}  {detail}")
