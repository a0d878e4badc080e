import numpy as np
import pytest

from uralab.codebook import build_codebook
from uralab.config import SystemConfig
from uralab.ldpc import build_ldpc


@pytest.fixture(scope="session")
def code24():
    return build_ldpc(7, 24)


@pytest.fixture(scope="session")
def small_cfg():
    return SystemConfig(B=32, Bp=6, Bc=26, Lp=32, L=200, M=4, Ka=2, ebn0_db=12.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def codebook_6_32():
    return build_codebook(3, 32, 6)
