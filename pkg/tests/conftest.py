from importlib import resources
from pathlib import Path

import pytest
from hypothesis import settings

from standup.script import load_library
from standup.sim.kinematics import load_kinematics

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

SCENARIOS = Path(str(resources.files("standup.data").joinpath("scenarios")))
SCRIPTS = Path(str(resources.files("standup.data").joinpath("scripts")))
KIN_TEXT = resources.files("standup.data").joinpath("nao_like.kin").read_text()


@pytest.fixture(scope="session")
def library():
    return load_library()


@pytest.fixture(scope="session")
def table():
    return load_kinematics()
