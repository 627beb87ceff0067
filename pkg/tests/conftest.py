import pytest

_LINES_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record one verdict line per acceptance criterion."""
    lines = request.config.stash[_LINES_KEY]

    def record(number, title, passed, detail):
        line = f"ACCEPTANCE {number} {'PASS' if passed else 'FAIL'} {title}: {detail}"
        print(line)
        lines.append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
