import pytest

_CRITERIA: list[str] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size propagation runs (minutes each)")


@pytest.fixture
def report():
    """Record one PASS/FAIL line for the acceptance summary and echo it."""

    def _report(label: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        _CRITERIA.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
