import pytest

ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def acceptance(request):
    """Record ``(passed, detail)`` for a numbered acceptance criterion."""
    table = request.config.stash[ACCEPTANCE]

    def record(number, passed, detail):
        table[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config.stash[ACCEPTANCE]
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(table):
        passed, detail = table[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
