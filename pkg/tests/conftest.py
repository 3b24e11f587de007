import contextlib
import time

import pytest


class _Criterion:
    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.detail = ""


@pytest.fixture
def criterion(request):
    """Context manager that logs one PASS/FAIL line per acceptance criterion."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", {})

    @contextlib.contextmanager
    def run(number: int, title: str):
        c = _Criterion(number, title)
        start = time.perf_counter()
        ok = False
        try:
            yield c
            ok = True
        finally:
            elapsed = time.perf_counter() - start
            line = f"criterion {number:>2} [{'PASS' if ok else 'FAIL'}] {title}: {c.detail} ({elapsed:.1f}s)"
            lines[number] = line
            print(line)

    return run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(lines):
        terminalreporter.write_line(lines[number])
