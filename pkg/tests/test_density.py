import io
import math

import numpy as np
import pytest

from cfmmbatch.density import (
    EmptyHalf,
    HyperbolicHalf,
    JumpHalf,
    density_cfmm,
    density_from_function,
    g_derivative,
    g_value,
    inverse_density,
    write_density_csv,
)
from cfmmbatch.errors import InconsistentDensities, OutOfRange, UnboundedDensity, WrongArity
from cfmmbatch.functions import ConstantProduct, ConstantSum, Custom, HSpec, Lmsr, Monomial, WeightedProduct

CP = density_from_function(ConstantProduct(), [1.0, 10.0])


def brute_force_sold(fn, reserves, z):
    return reserves[0] - fn.demand(reserves, [z, 1.0]).new_reserves[0]


def test_constant_product_closed_form():
    h = CP[0]
    assert isinstance(h, HyperbolicHalf)
    assert float(h.sold(40.0)) == 0.375
    assert float(h.sold(10.0)) == 0.0
    z = np.geomspace(0.1, 1e4, 200)
    assert np.allclose(h.sold(z), np.maximum(0.0, (z - 10.0) / (2 * z)), rtol=1e-15, atol=0)


def test_constant_sum_jump():
    h, other = density_from_function(ConstantSum(2.0), [5.0, 3.0])
    assert isinstance(h, JumpHalf)
    assert float(h.sold(2.5)) == 5.0 and float(h.sold(1.9)) == 0.0
    assert float(h.sold(2.0)) == 0.0  # left-continuous at the jump
    assert h.sold_range(2.0) == (0.0, 5.0)
    assert float(other.sold(1.0)) == 3.0  # B sold above rate 1/2 (B in A)


def test_spot_is_zero_point():
    for fn, x0 in ((ConstantProduct(), [2.0, 8.0]), (WeightedProduct(1, 3), [2.0, 5.0]), (Lmsr(), [1.0, 1.5])):
        h1, h2 = density_from_function(fn, x0)
        g = fn.gradient(np.array(x0))
        assert float(h1.sold(g[0] / g[1])) == pytest.approx(0.0, abs=1e-12)
        assert h1.spot * h2.spot == pytest.approx(1.0, rel=1e-12)


def test_inverse_examples():
    assert inverse_density(CP[0], 0.375) == pytest.approx(40.0, rel=1e-15)
    assert inverse_density(CP[0], 0.0) == pytest.approx(10.0, rel=1e-15)
    jump = JumpHalf(5.0, 2.0)
    for x in (1e-9, 1.0, 4.999):
        assert inverse_density(jump, x) == 2.0
    with pytest.raises(OutOfRange):
        inverse_density(CP[0], 0.6)


def test_g_values():
    for h in (CP[0], CP[1], JumpHalf(5.0, 2.0), density_from_function(Lmsr(), [1.0, 1.0])[0]):
        assert g_value(h, 0.0) == pytest.approx(0.0, abs=1e-15)
    jump = JumpHalf(5.0, 2.0)
    for x in (0.5, 2.0, 5.0):
        assert g_value(jump, x) == pytest.approx(x * math.log(0.5), rel=1e-15)


def test_g_derivative_finite_difference():
    h, x, d = CP[0], 0.2, 1e-6
    fd = (g_value(h, x + d) - g_value(h, x - d)) / (2 * d)
    assert fd == pytest.approx(math.log(1.0 / inverse_density(h, x)), abs=1e-5)
    assert g_derivative(h, x) == pytest.approx(math.log(1.0 / inverse_density(h, x)), rel=1e-14)


@pytest.mark.parametrize("fn, x0", [
    (ConstantProduct(), [1.0, 10.0]),
    (WeightedProduct(1.0, 3.0), [2.0, 5.0]),
    (HSpec([1.0, 2.0]), [1.0, 10.0]),
    (Custom.from_expression("x + y + x*y", ["x", "y"]), [1.0, 2.0]),
])
def test_density_matches_demand_and_g_is_concave(fn, x0):
    h1, _ = density_from_function(fn, x0)
    z = h1.spot * np.geomspace(1.0001, 50.0, 60)
    sold = np.asarray(h1.sold(z))
    assert np.all(np.diff(sold) >= -1e-12)
    want = np.array([brute_force_sold(fn, np.array(x0), zz) for zz in z])
    tol = 1e-9 if fn.kind != "custom" else 1e-4
    assert np.allclose(sold, want, atol=tol * max(x0))
    xs = np.sort(np.random.default_rng(0).uniform(0, 0.95 * h1.total, 30))
    g = np.array([g_value(h1, x) for x in xs])
    slopes = np.diff(g) / np.diff(xs)
    assert np.all(np.diff(slopes) <= 1e-9)


def test_lmsr_density_not_monotone():
    h, _ = density_from_function(Lmsr(), [1.0, 1.0])
    z = np.geomspace(1.01, 1e3, 400)
    raw = np.array([h.raw(v) for v in z])
    assert np.max(raw) > raw[-1] + 0.1  # rises, then falls back
    assert not h.monotone


def test_roundtrip_pair():
    pair = density_cfmm(CP)
    r = pair.demand([1.0, 10.0], [40.0, 1.0])
    assert r.delta[0] == pytest.approx(-0.375, rel=1e-14)
    for z in np.geomspace(0.01, 1e3, 100):
        a = ConstantProduct().demand([1.0, 10.0], [z, 1.0]).new_reserves
        b = pair.demand([1.0, 10.0], [z, 1.0]).new_reserves
        assert np.allclose(a, b, rtol=1e-8, atol=1e-12)


def test_pair_jump_semantics():
    pair = density_cfmm(density_from_function(ConstantSum(2.0), [5.0, 3.0]))
    r = pair.demand([5.0, 3.0], [3.0, 1.0])
    assert r.delta[0] == -5.0
    assert r.delta[1] == pytest.approx(15.0)


def test_empty_pair_never_trades():
    pair = density_cfmm((EmptyHalf(), EmptyHalf()))
    for z in (0.1, 1.0, 10.0):
        assert np.array_equal(pair.demand([0.0, 0.0], [z, 1.0]).delta, np.zeros(2))


def test_crossing_condition():
    with pytest.raises(InconsistentDensities):
        density_cfmm((JumpHalf(1.0, 1.0), JumpHalf(1.0, 0.5)))


def test_fee_scales_rates():
    h, _ = density_from_function(ConstantSum(2.0).__class__(2.0), [5.0, 3.0])
    from cfmmbatch.functions import apply_fee_wrapper

    hf, _ = density_from_function(apply_fee_wrapper(ConstantSum(2.0), [5.0, 3.0], 0.2), [5.0, 3.0])
    assert hf.rate == pytest.approx(h.rate / 0.8)


def test_errors():
    with pytest.raises(WrongArity):
        density_from_function(Monomial([1.0, 1.0, 1.0]), [1.0, 1.0, 1.0])
    with pytest.raises(UnboundedDensity):
        density_from_function(ConstantProduct(), [np.inf, 1.0])


def test_csv_export():
    buf = io.StringIO()
    write_density_csv(CP[0], buf, rates=[10.0, 40.0])
    lines = buf.getvalue().splitlines()
    assert lines[0] == "rate,D,d"
    assert lines[2].startswith("40,0.375,")
