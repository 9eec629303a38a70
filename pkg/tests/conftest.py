import os
import sys
import time

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_ACCEPTANCE_LINES = {}


class Criterion:
    """Times one acceptance check and records a PASS/FAIL line for it."""

    def __init__(self, number, title, budget):
        self.number, self.title, self.budget = number, title, budget
        self.checks = []

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def check(self, ok, detail):
        self.checks.append((bool(ok), detail))

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        if exc_type is not None:
            self.checks.append((False, f"raised {exc_type.__name__}: {exc}"))
        self.checks.append((elapsed < self.budget, f"runtime {elapsed:.2f}s < {self.budget:g}s"))
        ok = all(c for c, _ in self.checks)
        detail = "; ".join(d for _, d in self.checks)
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {self.number:>2}: {self.title} | {detail}"
        _ACCEPTANCE_LINES[self.number] = line
        print(line)
        if exc_type is None:
            failed = [d for c, d in self.checks if not c]
            assert not failed, "; ".join(failed)
        return False


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(_ACCEPTANCE_LINES[n])
