import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cfmmbatch.errors import InvalidPrices, TradeShapeError
from cfmmbatch.functions import ConstantProduct
from cfmmbatch.market import (
    BatchInstance,
    BatchSolution,
    CfmmDecl,
    LimitSellOffer,
    PriceVector,
    net_flows,
    normalize_prices,
    validate_instance,
    walras_residuals,
)
from cfmmbatch.reference import solve_two_asset


@pytest.mark.parametrize("p, want", [
    ((2, 4), (1, 2)),
    ((1, 1, 1), (1, 1, 1)),
    ((0.5, 0.25, 1), (2, 1, 4)),
])
def test_normalize_examples(p, want):
    assert np.array_equal(normalize_prices(p).values, np.array(want, dtype=float))


@pytest.mark.parametrize("bad", [(1.0, 0.0), (-1.0, 2.0), (np.nan, 1.0)])
def test_nonpositive_prices_rejected(bad):
    with pytest.raises(InvalidPrices):
        normalize_prices(bad)


positive = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False)


@given(st.lists(positive, min_size=1, max_size=6), st.floats(min_value=1e-3, max_value=1e3))
def test_normalize_idempotent_and_scale_free(vals, c):
    p = normalize_prices(vals)
    assert p.values.min() == 1.0
    assert np.array_equal(normalize_prices(p).values, p.values)
    q = normalize_prices(np.array(vals) * c)
    assert np.allclose(q.values, p.values, rtol=1e-12)
    assert np.argmin(vals) == np.argmin(p.values)


def test_validate_well_formed(lmsr):
    assert validate_instance(lmsr) == []


def test_validate_self_trade():
    inst = BatchInstance.from_symbols("AB", [LimitSellOffer(0, 0, 1.0, 1.0)])
    codes = [v.code for v in validate_instance(inst)]
    assert codes == ["self-trade"]


def test_validate_arity():
    inst = BatchInstance.from_symbols("AB", [CfmmDecl("c", (0, 1), [1.0, 2.0, 3.0], ConstantProduct())])
    codes = [v.code for v in validate_instance(inst)]
    assert codes == ["arity"]


def test_validate_unknown_asset_and_negative():
    inst = BatchInstance.from_symbols("AB", [LimitSellOffer(0, 5, 1.0, 1.0), LimitSellOffer(0, 1, -1.0, 1.0)])
    codes = sorted(v.code for v in validate_instance(inst))
    assert codes == ["negative-amount", "unknown-asset"]


def test_net_flows_empty():
    inst = BatchInstance.from_symbols("AB", [])
    sol = BatchSolution(PriceVector(np.ones(2)), np.zeros((0, 2)))
    assert np.array_equal(net_flows(inst, sol), np.zeros(2))


def test_net_flows_symmetric_trade():
    inst = BatchInstance.from_symbols("AB", [
        LimitSellOffer(0, 1, 1.0, 1.0),
        CfmmDecl("c", (0, 1), [10.0, 100.0], ConstantProduct()),
    ])
    sol = BatchSolution(PriceVector(np.array([10.0, 1.0])), np.array([[-1.0, 10.0], [1.0, -10.0]]))
    assert np.array_equal(net_flows(inst, sol), np.zeros(2))
    assert np.array_equal(walras_residuals(sol.prices, sol.trades), np.zeros(2))


def test_net_flows_shape_mismatch(lmsr):
    sol = BatchSolution(PriceVector(np.ones(2)), np.zeros((3, 2)))
    with pytest.raises(TradeShapeError):
        net_flows(lmsr, sol)


def test_net_flows_lmsr_solution(lmsr):
    sol = solve_two_asset(lmsr)
    assert np.max(np.abs(net_flows(lmsr, sol))) < 1e-9


def test_scale_floors_at_one():
    inst = BatchInstance.from_symbols("ABC", [LimitSellOffer(0, 1, 0.25, 1.0)])
    assert np.array_equal(inst.scale(), np.ones(3))
