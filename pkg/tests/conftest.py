import json
from pathlib import Path

import pytest

HERE = Path(__file__).parent
N_CRITERIA = 11

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def golden():
    with open(HERE / "golden.json") as fh:
        return json.load(fh)


def pytest_terminal_summary(terminalreporter):
    ran = any("test_acceptance" in str(item) for item in terminalreporter.stats.get("passed", []) +
              terminalreporter.stats.get("failed", []) + terminalreporter.stats.get("error", []))
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        ok, detail = ACCEPTANCE.get(n, (False, "not evaluated"))
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
