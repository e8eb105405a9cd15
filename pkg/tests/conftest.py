from collections.abc import Iterator

import pytest

from conormal_mhd._config import config_from_dict
from conormal_mhd._grid import Grid, GridSpec
from conormal_mhd._state import PhysicalParams
from conormal_mhd._store import Store


@pytest.fixture
def test_store() -> Iterator[Store]:
    try:
        yield Store.create("test")
    finally:
        Store.destroy("test")


@pytest.fixture(autouse=True)
def clear_global_store():
    yield
    Store.get_store().clear()


@pytest.fixture
def small_grid() -> Grid:
    return Grid(GridSpec(nx=16, ny=33, ymax=6.0, stretch_beta=1.5))


@pytest.fixture
def params() -> PhysicalParams:
    return PhysicalParams(epsilon=0.05, mu=1.0, lambda_=0.0, gamma=1.4)


@pytest.fixture
def tiny_config(tmp_path):
    """A run that finishes in a few dozen steps."""
    return config_from_dict(
        {
            "grid": {"nx": 8, "ny": 17, "ymax": 6.0, "stretch_beta": 1.0},
            "initial": {"amplitude": 0.01},
            "time": {"horizon": 0.04, "store_dt": 0.01, "report_dt": 0.02},
            "norms": {"m": 1, "alpha0_max": 1},
            "sweep": {"epsilon_list": [0.1, 0.05, 0.02]},
            "output": {"dir": str(tmp_path / "out")},
        }
    )


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption(
        "--acceptance", action="store_true", help="run the long acceptance suite"
    )
