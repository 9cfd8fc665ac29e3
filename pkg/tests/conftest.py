import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fern import FernIndex

settings.register_profile(
    "fern",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("fern")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def uniform(rng, n, d):
    return rng.uniform(-1.0, 1.0, size=(n, d)).astype(np.float32)


@pytest.fixture
def small_tree():
    """root [0,0]; left [1,0]; right [-1,0]; left-left [0.9,0.1]."""
    index = FernIndex(2)
    for v in ([0, 0], [1, 0], [-1, 0], [0.9, 0.1]):
        index.insert(v)
    return index


# -- acceptance reporting ----------------------------------------------------

_ACCEPTANCE: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = dict(report.user_properties).get("criterion")
    if marker is None:
        return
    number, title = marker
    _ACCEPTANCE.setdefault(number, [title, []])[1].append(report.outcome)


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_makereport(item, call):
    m = item.get_closest_marker("criterion")
    if m is not None and ("criterion", tuple(m.args)) not in item.user_properties:
        item.user_properties.append(("criterion", tuple(m.args)))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, outcomes = _ACCEPTANCE[number]
        if any(o == "failed" for o in outcomes):
            verdict = "FAIL"
        elif all(o == "skipped" for o in outcomes):
            verdict = "SKIP"
        else:
            verdict = "PASS"
        terminalreporter.write_line(f"criterion {number}: {verdict}  {title}  ({len(outcomes)} checks)")
