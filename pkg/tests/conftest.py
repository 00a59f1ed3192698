import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def square():
    return np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


def business_dates(n, start="2020-01-02"):
    return np.busday_offset(np.datetime64(start, "D"), np.arange(n), roll="forward")


def price_csv(dates, closes, header="date,close"):
    return header + "\n" + "".join(f"{d},{float(c)!r}\n" for d, c in zip(dates, closes))


# -- acceptance summary ------------------------------------------------------------

_criteria = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if "test_acceptance.py" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    num = int(name.split("_")[2])
    failed = report.failed or (report.when == "call" and report.outcome != "passed")
    if failed:
        _criteria[num] = "FAIL"
    elif report.when == "call":
        _criteria.setdefault(num, "PASS")
    elif report.skipped:
        _criteria.setdefault(num, "SKIP")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        terminalreporter.write_line(f"{_criteria[num]} criterion {num}")
