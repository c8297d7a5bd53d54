"""Collects acceptance verdicts and prints them as one block after the run."""

import pytest

CRITERIA = {
    1: "flat equilibrium exactness",
    2: "contact angle law",
    3: "equilibrium ODE residual order",
    4: "coefficient identities",
    5: "extension trace identity",
    6: "elliptic solver convergence",
    7: "Dirichlet-Neumann symbol",
    8: "mass conservation",
    9: "energy identity self-convergence",
    10: "higher identities under refinement",
    11: "exponential decay",
    12: "energy comparison sandwich",
    13: "mean-trace identity",
    14: "curvature remainder bounds",
}

_VERDICTS: dict[int, tuple[bool, str]] = {}


class AcceptanceLog:
    """Records one verdict per criterion; check() also asserts."""

    def seed(self, num: int) -> None:
        _VERDICTS.setdefault(num, (False, "no verdict recorded"))

    def check(self, num: int, ok, detail: str = "") -> None:
        ok = bool(ok)
        _VERDICTS[num] = (ok, detail)
        assert ok, f"criterion {num} ({CRITERIA[num]}): {detail}"


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_VERDICTS):
        ok, detail = _VERDICTS[num]
        verdict = "PASS" if ok else "FAIL"
        line = f"[{verdict}] {num:2d} {CRITERIA[num]}: {detail}"
        terminalreporter.write_line(line)
