import numpy as np
import pytest

from kggan import autodiff as ad


@pytest.fixture(autouse=True)
def clean_tape():
    ad.get_tape().clear()
    yield
    ad.get_tape().clear()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
