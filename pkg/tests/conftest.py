from __future__ import annotations

import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(number, title): one of the numbered acceptance criteria"
    )
    config.stash[_RESULTS] = {}


@pytest.fixture
def acceptance(request):
    """Dict the criterion test fills with a one-line ``detail`` for the summary."""
    info: dict = {}
    request.node.stash[_DETAIL] = info
    return info


_DETAIL = pytest.StashKey[dict]()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call":
        return
    number, title = marker.args
    detail = item.stash.get(_DETAIL, {}).get("detail", "")
    item.config.stash[_RESULTS][number] = (title, report.passed, detail)


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, passed, detail = results[number]
        status = "PASS" if passed else "FAIL"
        line = f"criterion {number:2d} [{status}] {title}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)
