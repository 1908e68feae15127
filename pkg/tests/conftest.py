import pytest

from trvirasoro import catalog
from trvirasoro.curve import validate
from trvirasoro.recursion import Recursion


@pytest.fixture(scope="session")
def airy_data():
    return validate(catalog.airy())


@pytest.fixture(scope="session")
def egdd_data():
    return validate(catalog.egdd(1, 4))


@pytest.fixture(scope="session")
def rb_data():
    return validate(catalog.r_bessel(3, 1))


@pytest.fixture(scope="session")
def airy_eng(airy_data):
    return Recursion(airy_data)


@pytest.fixture(scope="session")
def egdd_eng(egdd_data):
    return Recursion(egdd_data)


@pytest.fixture(scope="session")
def rb_eng(rb_data):
    return Recursion(rb_data)


@pytest.fixture(scope="session")
def engines(airy_eng, egdd_eng, rb_eng):
    return {"airy": airy_eng, "egdd": egdd_eng, "r_bessel": rb_eng}


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(RESULTS):
        ok, detail = RESULTS[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
