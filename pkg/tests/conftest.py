import sys
from pathlib import Path

# Make the shared oracle helpers importable from any test module.
sys.path.insert(0, str(Path(__file__).parent))

# Verdict lines recorded by the acceptance tests; printed in a summary
# section at the end of the run so they are visible even under capture.
ACCEPTANCE_VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance verdicts")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)
