import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from shiftlab.core import BasisWindow, CompactOp

settings.register_profile("shiftlab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("shiftlab")


def rand_op(rng, window, scale=1.0):
    d = window.dim
    return CompactOp(window, scale * (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(d))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def w3():
    return BasisWindow(3)


# ---------------------------------------------------------------- acceptance summary

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): one of the numbered acceptance criteria")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when == "teardown":
        return
    number, title = mark.args
    ok = rep.passed and _ACCEPTANCE.get(number, (True,))[0]
    if rep.when == "call" or not rep.passed:
        _ACCEPTANCE[number] = (ok, title)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, title = _ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:2d}. {title}")
