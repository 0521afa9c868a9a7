import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the hour-scale physics reproduction tests")


@pytest.fixture
def cache(tmp_path):
    from h1cavity.pipeline import ResultCache

    return ResultCache(tmp_path / "cache")


# acceptance report: one line per criterion, printed after the test summary
ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    def record(ident, text, ok):
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  [{ident}] {text}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    skipped = [r for r in terminalreporter.stats.get("skipped", []) if "test_acceptance" in r.nodeid]
    if ACCEPTANCE_LINES or skipped:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
        for rep in skipped:
            reason = rep.longrepr[2] if isinstance(rep.longrepr, tuple) else str(rep.longrepr)
            terminalreporter.write_line(f"SKIP  [{rep.nodeid.split('::')[-1]}] {reason.removeprefix('Skipped: ')}")
