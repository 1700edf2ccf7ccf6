import numpy as np
import pytest

from noisybq import _backend, _kernels_py

ACCEPTANCE_LINES: list[str] = []

BACKENDS = [_kernels_py]
if _backend.BACKEND == "cython":
    BACKENDS.append(_backend.core)


@pytest.fixture(params=BACKENDS, ids=lambda m: m.BACKEND)
def core(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
