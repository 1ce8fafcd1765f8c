import numpy as np
import pytest

from swapsched.bench import GeneratorConfig, generate_instance
from swapsched.schedcore import Instance, Job, ObjectiveConfig


def make_instance(proc_rows, dues, station_time, id="test"):
    jobs = [Job(tuple(p), d) for p, d in zip(proc_rows, dues)]
    return Instance(jobs, station_time, id=id)


@pytest.fixture
def obj_cfg():
    return ObjectiveConfig()


@pytest.fixture
def inst6():
    """Seeded 6-job, 3-station synthetic instance."""
    return generate_instance(
        GeneratorConfig(n_jobs=6, n_stations=3, due_slack_s=0.0, due_noise_s=500.0,
                        seed=7, count=1), 0)


@pytest.fixture
def inst20():
    """Reference-scale instance: 20 jobs, 12 stations, 208 s windows."""
    return generate_instance(GeneratorConfig(seed=11, count=1), 0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
