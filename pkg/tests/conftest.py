from pathlib import Path

import pytest

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return Path(__file__).parent / "data"


@pytest.fixture()
def acceptance_verdict():
    """Record a criterion verdict for the end-of-run summary."""

    def record(tag: str, passed: bool) -> None:
        _ACCEPTANCE_LINES.append(f"{tag}: {'PASS' if passed else 'FAIL'}")

    return record


def pytest_terminal_summary(terminalreporter):
    # one line per acceptance criterion, printed after capture ends
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
