import numpy as np
import pytest

from reactmap import _kernels
from reactmap.cam import ClassifierHead
from reactmap.context import embedding_pass, init_store
from reactmap.fixtures import default_suite_spec, generate


def pytest_sessionstart(session):
    # compile the jitted kernels once so timed tests measure math, not jit
    _kernels.warmup()


@pytest.fixture(scope="session")
def small_spec():
    """Cheap suite for unit tests; the acceptance file builds the full one."""
    return default_suite_spec(num_classes=4, dim=12, height=14, width=14, seed=11)


@pytest.fixture(scope="session")
def small_suite(small_spec):
    fixtures, head = generate(small_spec, 24)
    return fixtures, head


@pytest.fixture(scope="session")
def small_store(small_spec, small_suite):
    fixtures, head = small_suite
    store = init_store(small_spec.num_classes, small_spec.dim, seed=small_spec.seed)
    return embedding_pass(store, head, [(f.features, f.label) for f in fixtures])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_head(rng):
    return ClassifierHead(weights=rng.standard_normal((5, 7)), bias=rng.standard_normal(5))
