"""Acceptance bookkeeping: tests marked ``acceptance(n, title)`` are grouped
by criterion and summarised as one PASS/FAIL line each at the end of the run."""
from collections import OrderedDict

import pytest

_CRITERIA = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark is not None:
            num, title = mark.args
            entry = _CRITERIA.setdefault(num, {"title": title, "outcomes": []})
            item.user_properties.append(("acceptance", num))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    num = mark.args[0]
    failed = rep.failed or (rep.when == "setup" and rep.skipped)
    if rep.when == "call" or failed:
        _CRITERIA[num]["outcomes"].append(not failed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        entry = _CRITERIA[num]
        outs = entry["outcomes"]
        if not outs:
            status = "NOT RUN"
        else:
            status = "PASS" if all(outs) else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {entry['title']}")
