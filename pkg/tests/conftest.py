import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

_ACCEPTANCE = {}


def record(number, title, passed, detail=""):
    _ACCEPTANCE[(number, title)] = (bool(passed), detail)


@pytest.fixture
def criterion():
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title in sorted(_ACCEPTANCE):
        passed, detail = _ACCEPTANCE[(number, title)]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number:2d}: {title}  {detail}")
