import pytest

_RESULTS: dict[int, tuple[str, bool, str]] = {}


class AcceptanceLog:
    def record(self, number: int, name: str, passed: bool, detail: str = "") -> None:
        _RESULTS[number] = (name, bool(passed), detail)
        print(f"\n[criterion {number:2d}] {'PASS' if passed else 'FAIL'}  {name}  {detail}")


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        name, passed, detail = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {name}  {detail}")
