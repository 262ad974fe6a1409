import numpy as np
import pytest

from selfcal import _pykernels, kernels

_ACCEPTANCE = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def acceptance_log():
    """Collects one pass/fail line per acceptance criterion for the terminal summary."""

    def record(label, ok, detail=""):
        _ACCEPTANCE.append((label, bool(ok), detail))
        return ok

    return record


def _backends():
    out = [pytest.param(_pykernels, id="python")]
    compiled = kernels.compiled_backend()
    if compiled is not None:
        out.append(pytest.param(compiled, id="cython"))
    return out


@pytest.fixture(params=_backends())
def backend(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")
