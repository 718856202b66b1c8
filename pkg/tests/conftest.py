"""Shared test fixtures and the acceptance-summary hook."""

from __future__ import annotations

import numpy as np
import pytest

import jbf

# (name, passed, detail) rows appended by tests/test_acceptance.py and
# printed as a summary block at the end of the run.
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record_acceptance(name: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        line = f"{status}  {name}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    """Compile (or load from cache) every kernel once up front so
    individual test timings are not skewed by JIT latency."""
    x = jbf.Volume((3, 3, 2), np.arange(18, dtype=np.float64))
    params = jbf.FilterParams(1.0, 1.0, 1.0, 10.0)
    window = jbf.Window((1, 1, 1))
    cache = jbf.jbf_forward(x, x, params, window)
    dl = jbf.Volume(x.dims, np.ones(18))
    jbf.backward(x, x, params, window, cache, dl)
    jbf.gaussian_smooth(x, 0.8, radius=1)
    jbf.ssim(x, x, data_range=17.0, window_radius=1)
    yield
