import numpy as np
import pytest

from cfmmbatch.analysis import (
    budget_invariance_probe,
    family_identity_check,
    rule_demand,
    trading_rule_family,
    wgs_probe,
)
from cfmmbatch.errors import InvalidAlpha
from cfmmbatch.functions import ConstantProduct, ConstantSum, Custom, HSpec, Lmsr, Monomial, WeightedProduct, demand_response

SUBS = Custom.from_expression("x**2 + y*z", ["x", "y", "z"])
CURVE = Custom.from_expression("x + y + x*y", ["x", "y"])


@pytest.mark.parametrize("fn, x0", [
    (ConstantProduct(), [1.0, 10.0]),
    (WeightedProduct(1.0, 3.0), [2.0, 5.0]),
    (ConstantSum(2.0), [5.0, 3.0]),
    (Monomial([1.0, 2.0, 0.5]), [1.0, 2.0, 3.0]),
    (HSpec([2.0]), [1.0, 10.0]),
    (HSpec([1.0, 0.5, 0.25]), [2.0, 3.0]),
])
def test_wgs_passes(fn, x0):
    res = wgs_probe(fn, x0, samples=64)
    assert res.passed and res.witness is None and res.samples == 64


def test_wgs_witness_for_subs():
    res = wgs_probe(SUBS, [1.0, 1.0, 1.0], samples=256)
    assert not res.passed
    w = res.witness
    assert w["after"] < w["before"]
    assert w["asset"] != w["raised"]


def test_wgs_witness_for_lmsr():
    # the LMSR density rises then falls, so a large enough price move finds a drop
    assert not wgs_probe(Lmsr(), [1.0, 1.0], samples=256).passed


def test_probes_are_reproducible():
    a = wgs_probe(SUBS, [1.0, 1.0, 1.0], samples=64, seed=5)
    b = wgs_probe(SUBS, [1.0, 1.0, 1.0], samples=64, seed=5)
    assert a.to_json() == b.to_json()


def test_budget_probe():
    assert budget_invariance_probe(Monomial([1.0, 2.0, 0.5]), samples=64).passed
    assert budget_invariance_probe(HSpec([1.0, 0.5]), samples=64).passed
    res = budget_invariance_probe(CURVE, samples=64)
    assert not res.passed
    assert res.witness["test"] == "ray"


def test_samples_must_be_positive():
    with pytest.raises(ValueError):
        wgs_probe(ConstantProduct(), [1.0, 1.0], samples=0)
    with pytest.raises(ValueError):
        budget_invariance_probe(ConstantProduct(), samples=0)


def test_rule_family_values():
    s, p = np.array([4.0, 1.0]), np.array([1.0, 9.0])
    assert np.allclose(trading_rule_family(s, p, 0.5), [2.0, 3.0])
    assert np.array_equal(trading_rule_family(s, p, 0.0), s)
    assert np.array_equal(trading_rule_family(s, p, 1.0), p)
    for bad in (-0.1, 1.5):
        with pytest.raises(InvalidAlpha):
            trading_rule_family(s, p, bad)
    with pytest.raises(ValueError):
        trading_rule_family([0.0, 1.0], p, 0.5)


def test_family_identities():
    res = family_identity_check(samples=2000)
    assert res.passed and res.worst <= 1e-12


@pytest.mark.parametrize("fn, x0, p", [
    (ConstantProduct(), [1.0, 10.0], [40.0, 1.0]),
    (WeightedProduct(1.0, 3.0), [2.0, 5.0], [1.0, 3.0]),
    (Monomial([1.0, 2.0, 0.5]), [1.0, 2.0, 3.0], [2.0, 1.0, 0.5]),
])
def test_alpha_one_is_the_demand_response(fn, x0, p):
    assert np.array_equal(rule_demand(fn, x0, p, 1.0), demand_response(fn, x0, p).new_reserves)


def test_alpha_zero_keeps_reserves():
    assert np.array_equal(rule_demand(ConstantProduct(), [1.0, 10.0], [40.0, 1.0], 0.0), [1.0, 10.0])


def test_intermediate_alpha_lands_on_rule():
    x = rule_demand(ConstantProduct(), [1.0, 10.0], [40.0, 1.0], 0.5)
    assert x[1] / x[0] == pytest.approx(20.0, rel=1e-12)  # sqrt(10 * 40)
    assert 40.0 * x[0] + x[1] == pytest.approx(50.0, rel=1e-12)
