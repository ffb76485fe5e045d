import pytest

# criterion number -> (status, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.fixture
def criterion():
    def record(number: int, passed: bool | None, detail: str = "") -> None:
        status = "BLOCKED" if passed is None else ("PASS" if passed else "FAIL")
        ACCEPTANCE[number] = (status, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {status:<7} {detail}")
