import numpy as np
import pytest

from sparsesound.absorption import default_synthetic_model
from sparsesound.channel import SoundingModel
from sparsesound.sampling import gen_pfs, gen_ufs


@pytest.fixture
def pfs35():
    return gen_pfs(375e9, 10e9, 35)


@pytest.fixture
def ufs35():
    return gen_ufs(375e9, 10e9, 35)


@pytest.fixture
def ma():
    return default_synthetic_model()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def pfs_model_ma():
    return SoundingModel(gen_pfs(370e9, 20e9, 100), absorption=default_synthetic_model())
