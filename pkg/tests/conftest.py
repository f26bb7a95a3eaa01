import numpy as np
import pytest

from roughmor import (build_heat1d, default_heat1d_config, rough_rk_simulate,
                      sample_fbm_path, two_stage_reduce)
from roughmor._fixtures import mild_stable_system


@pytest.fixture(scope="session")
def heat100():
    return build_heat1d(default_heat1d_config(100))


@pytest.fixture(scope="session")
def heat_pipeline(heat100):
    # package defaults; the expensive call every heat test shares
    return two_stage_reduce(heat100)


@pytest.fixture(scope="session")
def heat_path():
    # the shared fresh path for the heat experiments: step 2^-10 over
    # T = 0.5, so 512 steps
    return sample_fbm_path(0.4, 2, 0.5, 512, 24)


@pytest.fixture(scope="session")
def heat_full_sim(heat100, heat_path):
    return rough_rk_simulate(heat100, heat_path)


@pytest.fixture(scope="session")
def random_stable_batch():
    # reproducible pool of small stable systems used across criteria
    return [mild_stable_system(3 + (k % 10), 1 + (k % 2), seed=1000 + k)
            for k in range(10)]
