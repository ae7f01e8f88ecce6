import pytest

_ACCEPTANCE: list[str] = []


@pytest.fixture
def report_criterion():
    """Record a PASS/FAIL line that is echoed in the terminal summary."""

    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        _ACCEPTANCE.append(f"{'PASS' if passed else 'FAIL'} [{number:2d}] {title}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
