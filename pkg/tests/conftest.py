import math

import numpy as np
import pytest

from cfmmbatch import kernels
from cfmmbatch.functions import ConstantProduct, ConstantSum, Lmsr
from cfmmbatch.market import BatchInstance, CfmmDecl, LimitBuyOffer, LimitSellOffer

LN2 = math.log(2.0)
LMSR_FILL = 2.0 / 3.0 * LN2  # 0.46209812037329684


def lmsr_instance():
    return BatchInstance.from_symbols("AB", [
        CfmmDecl("m1", (0, 1), [1.0, 1.0], Lmsr()),
        LimitSellOffer(0, 1, 100.0, 0.5, id="o1"),
    ])


def degenerate_instance():
    return BatchInstance.from_symbols("AB", [
        CfmmDecl("cp", (0, 1), [1.0, 10.0], ConstantProduct()),
        LimitSellOffer(0, 1, 1.0, 1.0, id="o1"),
        LimitSellOffer(1, 0, 3.0, 1.0 / 6.0, id="o2"),
    ])


def crossing_instance():
    """Sell 100 A at >= 0.5 B/A against a buyer of 40 A paying with B."""
    return BatchInstance.from_symbols("AB", [
        LimitSellOffer(0, 1, 100.0, 0.5, id="s"),
        LimitBuyOffer(1, 0, 100.0, 40.0, 0.5, id="b"),
    ])


def cp_cs_instance():
    return BatchInstance.from_symbols("AB", [
        CfmmDecl("cp", (0, 1), [2.0, 8.0], ConstantProduct()),
        CfmmDecl("cs", (0, 1), [5.0, 5.0], ConstantSum(3.0)),
        LimitSellOffer(1, 0, 4.0, 0.25, id="o1"),
    ])


@pytest.fixture
def lmsr():
    return lmsr_instance()


@pytest.fixture
def degenerate():
    return degenerate_instance()


@pytest.fixture
def crossing():
    return crossing_instance()


@pytest.fixture
def cp_cs():
    return cp_cs_instance()


@pytest.fixture(params=["python", "compiled"])
def backend(request):
    if request.param == "python":
        return kernels.python_backend
    impl = kernels.compiled_backend()
    if impl is None:
        pytest.skip("compiled extension not built")
    return impl


def rate(sol):
    p = np.asarray(sol.prices, dtype=float)
    return p[0] / p[1]
