import warnings

import numpy as np
import pytest

from oamsim.config import RunConfig
from oamsim.fieldgrid import GridSpec

WL = 810e-9


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec.square(256, 4e-3, WL)


@pytest.fixture(scope="session")
def methods_cfg():
    return RunConfig.preset("methods")


@pytest.fixture(scope="session")
def methods_transfer(methods_cfg):
    from oamsim.experiments import transfer_matrix
    return transfer_matrix(methods_cfg)


@pytest.fixture(scope="session")
def fig1_setup():
    return RunConfig.preset("fig1").setup()


@pytest.fixture
def no_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        yield


def rng(seed=0):
    return np.random.default_rng(seed)


# -- acceptance reporting: one PASS/FAIL line per criterion -------------------

_CRITERIA: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    n = mark.args[0]
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if not rep.passed:
        detail = f"{item.name} failed" + (f" ({detail})" if detail else "")
    status, old = _CRITERIA.get(n, ("PASS", ""))
    status = "PASS" if status == "PASS" and rep.passed else "FAIL"
    _CRITERIA[n] = (status, "; ".join(d for d in (old, detail) if d))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, detail = _CRITERIA[n]
        terminalreporter.write_line(f"CRITERION {n}: {status}  {detail}")
