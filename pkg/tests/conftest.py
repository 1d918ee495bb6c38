import json
from pathlib import Path

import pytest

from mfg_broker import ModelParams, make_grid, solve_mean_field, solve_traders

FIXTURES = Path(__file__).parent / "fixtures"

# (criterion id, title, passed, detail) collected by the acceptance suite
ACCEPTANCE_RESULTS: list = []


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def grid(params):
    return make_grid(params.T, 10_000)


@pytest.fixture(scope="session")
def mf(params, grid):
    return solve_mean_field(params, grid)


@pytest.fixture(scope="session")
def tc(params, mf):
    return solve_traders(params, [params.representative_type()], mf)[0]


@pytest.fixture(scope="session")
def small_grid(params):
    return make_grid(params.T, 1000)


@pytest.fixture(scope="session")
def small_mf(params, small_grid):
    return solve_mean_field(params, small_grid)


@pytest.fixture(scope="session")
def small_tc(params, small_mf):
    return solve_traders(params, [params.representative_type()], small_mf)[0]


@pytest.fixture(scope="session")
def oracle():
    return json.loads((FIXTURES / "coefficients_oracle.json").read_text())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid, title, ok, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {cid:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
