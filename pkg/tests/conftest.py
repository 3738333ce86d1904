import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).resolve().parent
sys.path.insert(0, str(TESTS))

FIXTURES = TESTS.parent / "fixtures"
GOLDEN = FIXTURES / "golden"


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def billing():
    from blps.parser import parse_source
    return parse_source(fixture_text("billing.blm"), "billing.blm")


@pytest.fixture(scope="session")
def transact():
    from blps.parser import parse_source
    return parse_source(fixture_text("transact.blm"), "transact.blm")


@pytest.fixture(scope="session")
def epay():
    from blps.contract import load_contract
    return load_contract(fixture_text("epay.ctr"))


@pytest.fixture(scope="session")
def ebilling(billing, transact, epay):
    from blps.integrator import integrate, parse_binding
    return integrate(billing, transact, parse_binding("billing.BFf1->transact(accno,amount,accno1)"), epay, "e-billing")


# acceptance lines collected by tests/test_acceptance.py and printed once per run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
