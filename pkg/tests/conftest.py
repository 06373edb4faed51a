"""Collects acceptance-criterion outcomes and prints one line per criterion."""
import pytest

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion this test backs")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    entry = _RESULTS.setdefault(n, {"title": title, "ok": True, "notes": []})
    if rep.failed or (rep.when == "call" and rep.skipped):
        entry["ok"] = False
        entry["notes"].append(item.name)
    if rep.when == "call":
        entry["notes"].extend(getattr(item, "acceptance_notes", []))


@pytest.fixture
def note(request):
    """Attach a short measurement string to the criterion summary line."""
    notes = request.node.__dict__.setdefault("acceptance_notes", [])
    return notes.append


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        r = _RESULTS[n]
        status = "PASS" if r["ok"] else "FAIL"
        extra = f"  [{'; '.join(r['notes'])}]" if r["notes"] else ""
        terminalreporter.write_line(f"{status}  criterion {n}: {r['title']}{extra}")
