import pytest

CRITERIA = {
    1: "loss oracles",
    2: "gradient suite",
    3: "distance regression learnability",
    4: "spatial encoding",
    5: "downstream protocol",
    6: "statistics oracles",
    7: "determinism",
    8: "augmentation properties",
}

_outcomes = {}
_notes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion exercised by the test")


def pytest_runtest_logreport(report):
    n = getattr(report, "criterion", None)
    if n is None:
        return
    failed = report.failed or (report.when == "call" and report.skipped)
    _outcomes[n] = _outcomes.get(n, True) and not failed


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args[0]


@pytest.fixture
def note(request):
    """Attach a measured value to the acceptance summary line of the test's criterion."""
    n = request.node.get_closest_marker("criterion").args[0]

    def add(text):
        _notes.setdefault(n, []).append(text)

    return add


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        status = "PASS" if _outcomes[n] else "FAIL"
        extra = "; ".join(_notes.get(n, []))
        terminalreporter.write_line(f"{status} {n}. {CRITERIA[n]}" + (f" ({extra})" if extra else ""))
