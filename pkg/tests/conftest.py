import sys
import time
from contextlib import contextmanager
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture()
def criterion(request):
    """Context manager that records one acceptance criterion's verdict and runtime."""
    results = request.config.stash[ACCEPTANCE]

    @contextmanager
    def record(number: int, description: str):
        start = time.perf_counter()
        try:
            yield
        except BaseException as exc:
            results[number] = (description, False, time.perf_counter() - start, f"{type(exc).__name__}: {exc}")
            raise
        results[number] = (description, True, time.perf_counter() - start, "")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        description, ok, seconds, why = results[number]
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  ({seconds:6.2f} s)  {description}"
        if why:
            line += f"  [{why.splitlines()[0][:120]}]"
        terminalreporter.write_line(line)
