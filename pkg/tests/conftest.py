import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Recorder for acceptance-criterion verdicts.

    Each acceptance test calls ``acceptance(n, ok, detail)`` exactly once;
    the verdicts are echoed immediately and again in the terminal summary.
    """

    def record(criterion: int, passed: bool, detail: str) -> None:
        line = f"[criterion {criterion}] {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append((criterion, line))
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
