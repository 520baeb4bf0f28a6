import pytest

from chanmc.crystal import build_channel
from chanmc.potential import PotentialField

ACCEPTANCE = {}
N_CRITERIA = 14


@pytest.fixture(scope="session")
def field():
    return PotentialField(build_channel())


@pytest.fixture(scope="session")
def geometry(field):
    return field.geometry


@pytest.fixture
def acceptance():
    """Record the outcome of one acceptance criterion for the end-of-run table."""

    def record(number, name, ok, detail):
        ACCEPTANCE[number] = (name, bool(ok), detail)
        print(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    ran = [r for key in ("passed", "failed") for r in terminalreporter.stats.get(key, [])
           if "test_acceptance" in getattr(r, "nodeid", "")]
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        if n in ACCEPTANCE:
            name, ok, detail = ACCEPTANCE[n]
            terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}")
        else:
            terminalreporter.write_line(f"criterion {n:2d} FAIL  not evaluated (test errored or was deselected)")
