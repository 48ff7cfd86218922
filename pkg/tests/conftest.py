import os
from pathlib import Path

import numpy as np
import pytest

ARTIFACT_DIR = Path(__file__).resolve().parent / "artifacts"


@pytest.fixture
def artifact_dir() -> Path:
    """Persistent directory for reports the test suite is required to emit."""
    ARTIFACT_DIR.mkdir(exist_ok=True)
    return ARTIFACT_DIR


@pytest.fixture(autouse=True)
def _isolated_output(tmp_path, monkeypatch):
    # keep CLI fallbacks out of the working tree
    monkeypatch.setenv("PHONOPREP_OUTPUT_DIR", str(tmp_path / "default-out"))
    monkeypatch.setenv("OMP_NUM_THREADS", os.environ.get("OMP_NUM_THREADS", "1"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
