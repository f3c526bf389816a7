import numpy as np
import pytest

_OUTCOMES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion a test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    entry = _OUTCOMES.setdefault(n, {"title": title, "parts": []})
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        if hasattr(rep, "wasxfail"):
            status = "FAIL"
            note = f"{item.name}: known failure, {rep.wasxfail}" if rep.skipped else f"{item.name}: unexpectedly passed"
        elif rep.skipped:
            status, note = "SKIP", f"{item.name}: skipped"
        else:
            status, note = ("PASS" if rep.passed else "FAIL"), item.name
        entry["parts"].append((status, note))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        e = _OUTCOMES[n]
        statuses = [s for s, _ in e["parts"]]
        overall = "PASS" if statuses and all(s == "PASS" for s in statuses) else "FAIL"
        failing = [note for s, note in e["parts"] if s != "PASS"]
        extra = f"  [{'; '.join(failing)}]" if failing else ""
        terminalreporter.write_line(f"criterion {n}: {overall}  {e['title']}{extra}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
