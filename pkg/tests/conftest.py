import sys


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance suite's PASS/FAIL lines after the test report."""
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
