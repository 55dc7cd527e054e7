import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CRITERIA: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    label, title = mark.args
    entry = _CRITERIA.setdefault(label, {"title": title, "status": "PASS", "notes": []})
    if rep.when == "setup" and not rep.failed:
        return
    if hasattr(rep, "wasxfail"):
        entry["status"] = "FAIL"
        entry["notes"].append(f"expected failure: {rep.wasxfail}")
    elif rep.failed:
        entry["status"] = "FAIL"
        entry["notes"].append(f"{item.name} failed")
    elif rep.skipped:
        entry["status"] = "SKIP"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_CRITERIA, key=lambda s: (int("".join(c for c in s if c.isdigit())), s)):
        e = _CRITERIA[label]
        note = f"  ({'; '.join(e['notes'])})" if e["notes"] else ""
        terminalreporter.write_line(f"{e['status']} criterion {label}: {e['title']}{note}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
