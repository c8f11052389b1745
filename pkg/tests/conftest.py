from pathlib import Path

import numpy as np
import pytest

from pairadv.model import PreferenceExample, PreferenceLabel

GOLDEN = Path(__file__).parent / "golden"

_acceptance_lines: list[str] = []


def record_criterion(number: int, name: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] AC{number:02d} {name}"
    if detail:
        line += f" :: {detail}"
    print(line)
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def example():
    return PreferenceExample("ex-1", "hi", "hello there", "go away", PreferenceLabel.binary("A"))
