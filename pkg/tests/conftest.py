"""Collects per-criterion outcomes from the acceptance module and prints them."""

import pytest

_results: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and not rep.failed:
        return
    number, title = marker.args
    entry = _results.setdefault(number, {"title": title, "ok": True, "notes": []})
    entry["ok"] = entry["ok"] and rep.passed
    for key, value in item.user_properties:
        if key == "measured" and rep.when == "call":
            entry["notes"].append(value)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        e = _results[number]
        line = f"criterion {number}: {'PASS' if e['ok'] else 'FAIL'}  {e['title']}"
        if e["notes"]:
            line += "  [" + "; ".join(e["notes"]) + "]"
        terminalreporter.write_line(line)
