"""Collects one pass/fail line per acceptance criterion and prints them at
the end of the session."""
import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when != "call" and rep.outcome == "passed":
        return
    detail = dict(item.user_properties).get("detail", "")
    if rep.skipped and not detail:
        detail = str(rep.longrepr[-1]) if isinstance(rep.longrepr, tuple) else ""
    status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
    _RESULTS[(mark.args[0], item.nodeid)] = (status, detail)
    line = f"criterion {mark.args[0]:2d}: {status}  {detail}"
    print("\n" + line)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for (n, _), (status, detail) in sorted(_RESULTS.items()):
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
