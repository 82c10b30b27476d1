import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one ``criterion N: PASS|FAIL`` line for the terminal summary."""
    lines = request.config.stash.setdefault(_LINES, [])

    def record(number: int, passed: bool, detail: str) -> bool:
        lines.append((number, f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines, key=lambda x: x[0]):
        terminalreporter.write_line(line)
