import sys
from pathlib import Path

import pytest

# stim_bridge lives next to the tests
sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion; printed in the terminal summary."""

    def record(number: int, ok: bool | None, detail: str) -> bool:
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        _CRITERIA[number] = f"criterion {number:2d}: {status}  {detail}"
        print(_CRITERIA[number])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])
