import json
import warnings
from pathlib import Path

import pytest

from slowlayer.constitutive import FluidModel, ShockData
from slowlayer.manifold import DomainSpec

ORACLE = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())


@pytest.fixture(scope="session")
def oracle():
    return ORACLE


@pytest.fixture(scope="session")
def model():
    return FluidModel()


@pytest.fixture(scope="session")
def shock(model):
    return ShockData.from_left_state(1.0, 0.5, model)


@pytest.fixture
def dom05():
    return DomainSpec(1.0, 0.05, 2048)


@pytest.fixture(autouse=True)
def _quiet_runtime_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield
