import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_CRITERION_RE = re.compile(r"test_criterion_(\d+)_(\w+)")
_acceptance_results: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    m = _CRITERION_RE.search(report.nodeid)
    if not m:
        return
    num, label = int(m.group(1)), m.group(2).replace("_", " ")
    if report.when == "call":
        outcome = "PASS" if report.passed else "FAIL"
    elif report.when == "setup" and report.skipped:
        outcome = "SKIP"
    elif report.when == "setup" and report.failed:
        outcome = "FAIL"
    else:
        return
    _acceptance_results[num] = (label, outcome)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_acceptance_results):
        label, outcome = _acceptance_results[num]
        terminalreporter.write_line(f"{outcome}  criterion {num}: {label}")
