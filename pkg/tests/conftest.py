# Acceptance verdict lines are collected here and echoed after the run, so
# they appear even when pytest captures stdout.
VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
