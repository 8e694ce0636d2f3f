import pytest

_ACCEPTANCE: list[str] = []


@pytest.fixture
def record():
    """Log one summary line per acceptance criterion."""

    def _record(label: str, ok: bool, detail: str) -> bool:
        line = f"{label:<5} {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
