import numpy as np
import pytest

from bicausal_ot.core.process import GaussianAR1


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="运行耗时较长的验收测试")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="需要 --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def gaussian_pair():
    """一维参考模型：Σx = 1, Σy = 0.25, x0 = 1, y0 = 2。"""

    def make(T: int = 1):
        return GaussianAR1([1.0], [[1.0]], T), GaussianAR1([2.0], [[0.25]], T)

    return make
