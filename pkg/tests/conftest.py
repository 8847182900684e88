import pytest

# one line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance_record(request):
    """Record (and echo immediately) the PASS/FAIL line of one criterion."""
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def record(k: int, ok: bool, detail: str, runtime: float):
        line = f"CRITERION {k:2d}: {'PASS' if ok else 'FAIL'}  [{runtime:7.1f} s]  {detail}"
        ACCEPTANCE_LINES[k] = line
        with capman.global_and_fixture_disabled():
            print("\n" + line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
