import numpy as np
import pytest

from polyakagm import kernels

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    return kernels.get_backend(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def record_criterion():
    """Register a one-line pass/fail result for the acceptance summary."""

    def record(label: str, ok: bool, detail: str = ""):
        ACCEPTANCE_RESULTS.append((label, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")
