import pytest
from hypothesis import settings

from quadsum.algebra import GF, QQ, target_from_roots

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

FIELDS = [QQ, GF(2), GF(3), GF(5)]


def sz(f):
    return (target_from_roots(f, 0, 0),) * 3


def idem(f):
    return (target_from_roots(f, 0, 1),) * 3


@pytest.fixture(params=FIELDS, ids=str)
def field(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
