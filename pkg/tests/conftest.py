import numpy as np
import pytest

from dmpgen import datagen, expert, tasks


@pytest.fixture(scope="session")
def stack_spec():
    return tasks.get_task("stack")


@pytest.fixture(scope="session")
def stack_src(stack_spec):
    demos = expert.synthesize(stack_spec, "D0", np.random.default_rng(7))
    return datagen.SourceDataset(stack_spec, demos)


@pytest.fixture(scope="session")
def mug_spec():
    return tasks.get_task("mugcleanup-surrogate")
