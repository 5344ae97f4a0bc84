import os

import pytest

from rcjrp.verify import sweep_interleaved, sweep_shifted, sweep_static


def pytest_addoption(parser):
    parser.addoption("--full", action="store_true", default=False, help="run the N = L = 2000 LP")


@pytest.fixture(scope="session")
def full_run(request) -> bool:
    return request.config.getoption("--full") or os.environ.get("RCJRP_FULL") == "1"


@pytest.fixture(scope="session")
def static_sweep():
    return sweep_static(10, 10)


@pytest.fixture(scope="session")
def shifted_sweep():
    return sweep_shifted(10, 10)


@pytest.fixture(scope="session")
def interleaved_sweep():
    return sweep_interleaved()


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture()
def record():
    def _record(number: int, ok: bool, detail: str):
        ACCEPTANCE[number] = (bool(ok), detail)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
