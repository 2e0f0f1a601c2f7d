import time

SUITE_START = time.perf_counter()
SUITE_BUDGET_S = 600.0

# Filled by test_acceptance._report; echoed after the run so the criterion
# table is visible even without -s.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
    elapsed = time.perf_counter() - SUITE_START
    terminalreporter.write_line(
        f"suite wall time: {elapsed:.1f} s (budget {SUITE_BUDGET_S:.0f} s)"
    )
