import warnings

import numpy as np
import pytest
from hypothesis import settings

from potlab.model import Domain

settings.register_profile("potlab", deadline=None, max_examples=40)
settings.load_profile("potlab")


@pytest.fixture(autouse=True)
def _quiet_integration_warnings():
    # scipy's quad warns on kinked integrands that it still resolves to tolerance
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=Warning)
        yield


@pytest.fixture
def half3():
    return Domain.halfspace(3)


@pytest.fixture
def ball3():
    return Domain.ball(3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criteria report one line each, repeated in the terminal summary
ACCEPTANCE = {}


class _Criterion:
    def __init__(self, k):
        self.k = k
        self.detail = ""

    def __enter__(self):
        return self

    def __exit__(self, etype, exc, tb):
        status = "PASS" if etype is None else "FAIL"
        detail = self.detail if etype is None else f"{etype.__name__}: {exc}"[:300]
        line = f"criterion {self.k}: {status}" + (f"  {detail}" if detail else "")
        ACCEPTANCE[self.k] = line
        print(line)
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
