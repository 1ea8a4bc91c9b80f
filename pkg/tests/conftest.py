import pytest

VERDICTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def verdict():
    """``verdict(n, ok, detail)`` records criterion ``n`` and prints its line."""

    def record(n: int, ok: bool, detail: str) -> None:
        VERDICTS[n] = (bool(ok), detail)
        print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        ok, detail = VERDICTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
