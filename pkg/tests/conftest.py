import sys

import numpy as np
import pytest

from rcldpc.construction import lift, member_code
from rcldpc.protomatrix import Protomatrix, embedded_family

# small protograph with a parallel edge and a punctured column, lifted at Z = 4
TOY_PROTO = Protomatrix(np.array([[2, 1, 1, 1, 0], [1, 1, 1, 0, 1]]), frozenset({0}))


@pytest.fixture(scope="session")
def family():
    return embedded_family()


@pytest.fixture(scope="session")
def family_codes(family):
    """All 15 members lifted at Z = 32 with the default seed."""
    return [member_code(family, n) for n in range(len(family))]


@pytest.fixture(scope="session")
def toy_code():
    """Girth >= 6 toy code from the same two-stage pipeline at Z = 4."""
    code = lift(TOY_PROTO, Z=4, seed=0, daughter=TOY_PROTO.shape)
    assert code.meta["girth_ok"]
    return code


@pytest.fixture(scope="session")
def member1_z4(family):
    """Member 1 of the family lifted at Z = 4 (girth not enforced)."""
    return lift(family.member(1), Z=4, seed=0, max_retries=1)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
