import numpy as np
import pytest
from hypothesis import settings

from gaitkin import synth

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def recipe():
    return synth.GaitRecipe()


@pytest.fixture(scope="session")
def scene(recipe):
    return synth.generate_gait(recipe)


@pytest.fixture(scope="session")
def rig():
    return synth.default_camera_rig()


@pytest.fixture(scope="session")
def model(scene):
    return scene.model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
