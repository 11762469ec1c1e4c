import pytest

_RESULTS = []


class CriterionLog:
    def __init__(self, name):
        self.name = name
        self.checks = []
        self.done = False

    def check(self, ok, detail):
        self.checks.append((bool(ok), detail))
        return bool(ok)

    def finish(self):
        self.done = True
        return self.passed

    @property
    def passed(self):
        return self.done and bool(self.checks) and all(ok for ok, _ in self.checks)


@pytest.fixture
def criterion(request):
    """Record named acceptance checks; the summary lists one line per criterion."""
    log = CriterionLog(request.node.get_closest_marker("criterion").args[0])
    _RESULTS.append(log)
    yield log
    # a test that raised before finish() shows as FAIL
    details = "; ".join(detail for _, detail in log.checks)
    print(f"[{'PASS' if log.passed else 'FAIL'}] {log.name}: {details}")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion label")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for log in _RESULTS:
        details = "; ".join(detail for _, detail in log.checks) or "no checks recorded"
        terminalreporter.write_line(f"[{'PASS' if log.passed else 'FAIL'}] {log.name}: {details}")
