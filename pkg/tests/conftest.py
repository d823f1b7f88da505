import os

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def report():
    """Record one PASS/FAIL line per acceptance criterion."""

    def emit(number: int, ok: bool, text: str) -> bool:
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {text}"
        ACCEPTANCE.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
