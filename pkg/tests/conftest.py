import sys

import pytest

from drawdown_lab.closedform import Bessel3Params, BrownianParams, bes3_provider, bm_provider


@pytest.fixture(scope="session")
def bm():
    return bm_provider(BrownianParams(0.0, 1.0))


@pytest.fixture(scope="session")
def bm_drift():
    return bm_provider(BrownianParams(1.0, 1.0))


@pytest.fixture(scope="session")
def bes3():
    return bes3_provider(Bessel3Params())


@pytest.fixture(scope="session")
def models():
    out = {f"bm{mu:+g}": bm_provider(BrownianParams(mu, 1.0)) for mu in (-1.0, 0.0, 1.0)}
    out["bes3"] = bes3_provider()
    return out


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
