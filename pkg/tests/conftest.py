"""Shared pytest plumbing: the acceptance suite registers one human-readable
pass/fail line per criterion, echoed in the terminal summary and written to
acceptance_report.txt at the repository root."""

from pathlib import Path

CRITERION_LINES: list[str] = []

_REPORT_PATH = Path(__file__).resolve().parent.parent / "acceptance_report.txt"


def record_criterion(line: str) -> None:
    CRITERION_LINES.append(line)
    _REPORT_PATH.write_text("\n".join(CRITERION_LINES) + "\n")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in CRITERION_LINES:
        terminalreporter.write_line(line)
    terminalreporter.write_line(f"(also written to {_REPORT_PATH})")
