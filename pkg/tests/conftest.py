import numpy as np
import pytest

import convelm


@pytest.fixture
def tiny_spec():
    return convelm.parse_arch("2c-2s", 3, 8)


@pytest.fixture
def tiny_params(tiny_spec):
    return convelm.init_params(tiny_spec, 0)


@pytest.fixture
def tiny_batch():
    rng = np.random.default_rng(11)
    return rng.random((5, 1, 8, 8)).astype(np.float32)


@pytest.fixture(scope="session")
def small_train():
    return convelm.make_dataset(600, seed=101, num_classes=10)


@pytest.fixture(scope="session")
def small_test():
    return convelm.make_dataset(300, seed=102, num_classes=10)
