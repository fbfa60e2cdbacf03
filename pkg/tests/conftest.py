import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> (status, detail), filled by test_acceptance
_RESULTS: dict[int, tuple[str, str]] = {}
_COLLECTED: set[int] = set()
_SKIP_REASON = "full-scale run; use --full or ABSCS_FULL=1"


def pytest_addoption(parser):
    parser.addoption("--full", action="store_true", default=False, help="run full-scale acceptance checks")


def full_mode(config) -> bool:
    return config.getoption("--full") or os.environ.get("ABSCS_FULL") == "1"


def _criterion(name: str) -> int | None:
    if name.startswith("test_criterion_"):
        return int(name.split("_")[2])
    return None


def pytest_collection_modifyitems(config, items):
    full = full_mode(config)
    for item in items:
        number = _criterion(item.originalname if hasattr(item, "originalname") else item.name)
        if number is not None:
            _COLLECTED.add(number)
        if "full" in item.keywords and not full:
            item.add_marker(pytest.mark.skip(reason=_SKIP_REASON))


@pytest.fixture
def record():
    """Store one acceptance verdict for the end-of-session summary."""

    def _record(number: int, passed: bool, detail: str):
        status = "PASS" if passed else "FAIL"
        if number in _RESULTS:  # several tests for one criterion: any failure wins
            old_status, old_detail = _RESULTS[number]
            status = "FAIL" if "FAIL" in (status, old_status) else "PASS"
            detail = f"{old_detail} | {detail}"
        _RESULTS[number] = (status, detail)

    return _record


def pytest_runtest_logreport(report):
    # a criterion that crashed before recording a verdict still gets a FAIL line
    number = _criterion(report.nodeid.rsplit("::", 1)[-1].split("[")[0])
    if number is not None and report.when == "call" and report.failed and number not in _RESULTS:
        _RESULTS[number] = ("FAIL", "error before a verdict was recorded")


def pytest_terminal_summary(terminalreporter):
    if not _COLLECTED:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_COLLECTED):
        status, detail = _RESULTS.get(number, ("SKIP", _SKIP_REASON))
        terminalreporter.write_line(f"criterion {number:2d}: {status} - {detail}")
