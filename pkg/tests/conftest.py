import sys


def pytest_terminal_summary(terminalreporter):
    """Echo the sign-off verdict lines after the usual pytest output."""
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None) if mod else None
    if verdicts:
        terminalreporter.write_sep("-", "acceptance verdicts")
        for line in verdicts:
            terminalreporter.write_line(line)
