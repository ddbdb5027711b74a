import math
from fractions import Fraction

import numpy as np
import pytest

from cfmmbatch.convex import solve_convex
from cfmmbatch.errors import NoEquilibriumFound, WrongArity
from cfmmbatch.functions import ConstantProduct, ConstantSum
from cfmmbatch.generate import random_instance
from cfmmbatch.market import BatchInstance, CfmmDecl, LimitSellOffer
from cfmmbatch.reference import ReferenceOptions, excess_interval, legacy_exact_constant_check, solve_two_asset
from cfmmbatch.verify import verify_solution
from conftest import LMSR_FILL, rate


def test_lmsr_grid_scan(lmsr):
    sol = solve_two_asset(lmsr)
    assert sol.info["method"] == "grid"  # LMSR is not WGS
    assert rate(sol) == pytest.approx(0.5, rel=1e-10)
    assert -sol.trades[1, 0] == pytest.approx(LMSR_FILL, rel=1e-10)
    assert verify_solution(lmsr, sol).passed


def test_bisection_for_wgs_markets():
    inst = BatchInstance.from_symbols("AB", [
        CfmmDecl("c", (0, 1), [1.0, 4.0], ConstantProduct()),
        CfmmDecl("d", (0, 1), [1.0, 9.0], ConstantProduct()),
    ])
    sol = solve_two_asset(inst)
    assert sol.info["method"] == "bisection"
    assert rate(sol) == pytest.approx(6.5, rel=1e-11)


def test_excess_interval_spans_jump():
    inst = BatchInstance.from_symbols("AB", [LimitSellOffer(0, 1, 2.0, 1.5)])
    assert excess_interval(inst, 1.5) == (-2.0, 0.0)
    assert excess_interval(inst, 1.6) == (-2.0, -2.0)
    assert excess_interval(inst, 1.4) == (0.0, 0.0)


def test_clears_at_a_jump():
    # seller of 2 A at >= 1.5 against a constant-sum pool quoting 2
    inst = BatchInstance.from_symbols("AB", [
        LimitSellOffer(0, 1, 2.0, 1.5),
        LimitSellOffer(1, 0, 1.5, 1 / 1.5),
    ])
    sol = solve_two_asset(inst)
    assert rate(sol) == pytest.approx(1.5, rel=1e-12)
    assert verify_solution(inst, sol).passed


def test_constant_sum_and_product(cp_cs):
    sol = solve_two_asset(cp_cs)
    assert rate(sol) == pytest.approx(3.0, rel=1e-12)
    assert verify_solution(cp_cs, sol).passed


def test_no_equilibrium_reports_diagnostic():
    inst = BatchInstance.from_symbols("AB", [LimitSellOffer(0, 1, 1.0, 2.0)])
    with pytest.raises(NoEquilibriumFound) as info:
        solve_two_asset(inst)
    assert info.value.diagnostic


def test_requires_two_assets():
    inst = BatchInstance.from_symbols("ABC", [LimitSellOffer(0, 1, 1.0, 1.0)])
    with pytest.raises(WrongArity):
        solve_two_asset(inst)


@pytest.mark.parametrize("seed", range(8))
def test_agrees_with_convex(seed):
    inst = random_instance(np.random.default_rng(seed), 2, 6)
    a, b = solve_two_asset(inst), solve_convex(inst)
    assert rate(a) == pytest.approx(rate(b), rel=1e-5)


def test_legacy_finds_partial_fill_at_limit(degenerate):
    # at rate 6 the B seller sits on its limit; selling 2 of 3 B clears with
    # the pool buying 2/3 A and (1 + 2/3)(10 - 4) = 10
    report = legacy_exact_constant_check(degenerate)
    assert report.zero_feasible
    assert [e["exact_rate"] for e in report.nonzero] == ["6"]
    assert report.nonzero[0]["cfmm_sells_a"] == pytest.approx(-2 / 3, rel=1e-15)
    assert (1 + Fraction(2, 3)) * (10 - 6 * Fraction(2, 3)) == 10


def test_legacy_only_zero_when_no_curve_trade_fits():
    inst = BatchInstance.from_symbols("AB", [
        CfmmDecl("cp", (0, 1), [1.0, 10.0], ConstantProduct()),
        LimitSellOffer(0, 1, 1.0, 100.0),
    ])
    assert legacy_exact_constant_check(inst, grid=2000).only_zero


def test_legacy_needs_one_cfmm(cp_cs):
    with pytest.raises(WrongArity):
        legacy_exact_constant_check(cp_cs)


def test_options_grid_size_matters_only_for_speed(lmsr):
    a = solve_two_asset(lmsr, ReferenceOptions(grid=10_000))
    assert rate(a) == pytest.approx(0.5, rel=1e-10)
    assert not math.isnan(a.info["residual"])
