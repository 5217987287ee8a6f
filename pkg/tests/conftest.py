import pytest

# (criterion number, short name, passed, detail) collected by the acceptance tests
ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    def _record(num, name, passed, detail=""):
        line = f"criterion {num} [{'PASS' if passed else 'FAIL'}] {name}: {detail}"
        ACCEPTANCE_LINES.append((num, line))
        print(line)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES, key=lambda x: x[0]):
        terminalreporter.write_line(line)
