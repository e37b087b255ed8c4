import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def dal_game():
    from dalgame.dal import DALGame, make_task
    return DALGame(make_task())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
