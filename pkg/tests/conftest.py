import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from corrovv import data_path  # noqa: E402


@pytest.fixture
def data():
    return data_path


@pytest.fixture(scope="session")
def stop_models():
    from corrovv.automata import load_model

    prop = load_model(data_path("stop_rule.prop")).property
    ctrl = {n: load_model(data_path(f"{n}.ta")).automaton for n in ("stop_rule", "stop_rule_faulty", "proceed_regardless")}
    return ctrl, prop


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report_criterion():
    """Record one pass/fail line per acceptance criterion (echoed in the summary)."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
