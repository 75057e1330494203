import pytest

_LINES_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES_KEY] = []


@pytest.fixture
def criterion(request):
    """Record one pass/fail line for an acceptance criterion and print it."""
    lines = request.config.stash[_LINES_KEY]

    def report(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {number:>2} [{'PASS' if ok else 'FAIL'}] {title}" + (f": {detail}" if detail else "")
        lines.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
