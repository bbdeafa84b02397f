import numpy as np
import pytest

from walker_distill.config import settings
from walker_distill.motion import generate_reference_clips
from walker_distill.sim import RobotModel, Terrain


@pytest.fixture
def model() -> RobotModel:
    return RobotModel()


@pytest.fixture
def flat() -> Terrain:
    return Terrain.flat()


@pytest.fixture(scope="session")
def library():
    return generate_reference_clips()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _isolated_output_root(tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "output_root", str(tmp_path / "runs"))
