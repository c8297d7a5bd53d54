"""Data locations plus the acceptance verdict block for this package."""

from pathlib import Path

import pytest

DATA = Path(__file__).resolve().parent.parent / "data"

CRITERIA = {15: "figure reproduction from committed outputs"}

_VERDICTS: dict[int, tuple[bool, str]] = {}


class AcceptanceLog:
    def seed(self, num: int) -> None:
        _VERDICTS.setdefault(num, (False, "no verdict recorded"))

    def check(self, num: int, ok, detail: str = "") -> None:
        ok = bool(ok)
        _VERDICTS[num] = (ok, detail)
        assert ok, f"criterion {num} ({CRITERIA[num]}): {detail}"


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


@pytest.fixture(scope="session")
def data_dir():
    return DATA


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_VERDICTS):
        ok, detail = _VERDICTS[num]
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{verdict}] {num:2d} {CRITERIA[num]}: {detail}")
