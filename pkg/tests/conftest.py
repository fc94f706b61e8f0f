import re

import numpy as np
import pytest

from dynbc_wave.assembly import assemble
from dynbc_wave.mesh import generate_annulus, generate_interval

_AC_RESULTS: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = re.match(r"test_ac(\d+)_", item.name)
    if not m or rep.when != "call":
        return
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _AC_RESULTS[int(m.group(1))] = ("PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _AC_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_AC_RESULTS):
        status, detail = _AC_RESULTS[k]
        terminalreporter.write_line(f"AC-{k:<2} {status}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def rod_small():
    return assemble(generate_interval(1.0, 20))


@pytest.fixture(scope="session")
def annulus_small():
    return assemble(generate_annulus(0.3, 1.0, 3, 12))
