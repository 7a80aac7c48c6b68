import functools
import os

import numpy as np
import pytest

from focsyn import bundled_example
from focsyn.synthesis import SynthesisRequest, synthesize

DATA = os.path.join(os.path.dirname(__file__), os.pardir, "src", "focsyn", "data")


def data_path(name):
    return os.path.abspath(os.path.join(DATA, f"{name}.json"))


@functools.lru_cache(maxsize=None)
def solved(name, nc):
    """Synthesis results are shared across test modules; each solve is ~1 s."""
    prob = bundled_example(name)
    return synthesize(SynthesisRequest(prob.system, nc))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def ex1():
    return bundled_example("example1")


@pytest.fixture(scope="session")
def ex2():
    return bundled_example("example2")


@pytest.fixture(scope="session")
def ex3():
    return bundled_example("example3")
