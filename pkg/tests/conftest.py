from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

from dta.network import load_network  # noqa: E402

GOLDEN = HERE / "data" / "golden_ide.json"


@pytest.fixture
def golden_path() -> Path:
    return GOLDEN


@pytest.fixture
def golden_doc() -> dict:
    return json.loads(GOLDEN.read_text())


@pytest.fixture
def golden_net():
    return load_network(GOLDEN)


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    lines = test_acceptance.REPORT
    if lines:
        terminalreporter.section("acceptance criteria")
        for key in sorted(lines):
            terminalreporter.write_line(lines[key])
