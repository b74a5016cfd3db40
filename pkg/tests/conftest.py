import time
from contextlib import contextmanager

import pytest

CRITERIA: dict[int, tuple[str, str, float]] = {}


@contextmanager
def _criterion(number: int, budget: float):
    """Record PASS/FAIL and wall time for acceptance criterion ``number``."""
    notes: list[str] = []
    t0 = time.perf_counter()
    try:
        yield notes
        elapsed = time.perf_counter() - t0
        if elapsed > budget:
            notes.append(f"runtime {elapsed:.1f}s over budget {budget:g}s")
            raise AssertionError(notes[-1])
        CRITERIA[number] = ("PASS", "; ".join(notes), elapsed)
    except BaseException as exc:
        detail = "; ".join(notes) if notes else str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        CRITERIA[number] = ("FAIL", detail, time.perf_counter() - t0)
        raise


@pytest.fixture
def criterion():
    return _criterion


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        status, detail, elapsed = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {status} ({elapsed:.1f}s) {detail}")
