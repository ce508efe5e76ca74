"""Shared test configuration: per-criterion summary lines for acceptance."""

import re


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    entries = {}
    for outcome, label in (("passed", "PASS"), ("failed", "FAIL"),
                           ("skipped", "SKIP")):
        for report in terminalreporter.stats.get(outcome, ()):
            nodeid = getattr(report, "nodeid", "")
            match = re.search(r"test_acceptance.*test_criterion_(\d+)_(\w+)", nodeid)
            if not match:
                continue
            if outcome == "skipped" or getattr(report, "when", "call") == "call":
                num = int(match.group(1))
                name = match.group(2).replace("_", " ")
                entries[num] = f"{label} criterion {num:2d}: {name}"
    if entries:
        terminalreporter.section("acceptance criteria")
        for num in sorted(entries):
            terminalreporter.write_line(entries[num])
