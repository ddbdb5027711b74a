import math

import numpy as np
import pytest

from cfmmbatch.convex import solve_convex
from cfmmbatch.errors import UnsupportedParticipant
from cfmmbatch.functions import ConstantProduct, WeightedProduct
from cfmmbatch.generate import random_instance
from cfmmbatch.market import BatchInstance, CfmmDecl, LimitSellOffer
from cfmmbatch.tatonnement import TatonnementOptions, aggregate_demand, solve_tatonnement
from cfmmbatch.verify import verify_solution
from conftest import LMSR_FILL, rate


@pytest.mark.parametrize("rho", [0.6, 0.4])
def test_aggregate_demand_lmsr(lmsr, rho):
    # the pool sells (ln z)/(1 + z) B at z = 1/rho and takes A in return
    z = 1.0 / rho
    b_sold = math.log(z) / (1.0 + z)
    offer = 100.0 if rho > 0.5 else 0.0  # limit 0.5 B per A
    got = aggregate_demand(lmsr, [rho, 1.0])
    assert got[0] == pytest.approx(b_sold / rho - offer, rel=1e-12)
    assert got[1] == pytest.approx(offer * rho - b_sold, rel=1e-12)


def test_aggregate_demand_pinned_values(lmsr):
    assert aggregate_demand(lmsr, [0.6, 1.0])[0] + 100 == pytest.approx(0.3193, abs=1e-4)
    assert aggregate_demand(lmsr, [0.4, 1.0])[0] == pytest.approx(0.6545, abs=1e-4)


def test_walras_law_for_demand():
    inst = random_instance(np.random.default_rng(3), 3, 6, families=("cp", "weighted", "offer"))
    rng = np.random.default_rng(4)
    for _ in range(20):
        p = 10.0 ** rng.uniform(-1, 1, 3)
        assert p @ aggregate_demand(inst, p) == pytest.approx(0.0, abs=1e-9 * float(p @ inst.scale()))


def test_empty_instance():
    inst = BatchInstance.from_symbols("AB", [])
    assert np.array_equal(aggregate_demand(inst, [1.0, 2.0]), np.zeros(2))
    sol = solve_tatonnement(inst)
    assert np.array_equal(np.asarray(sol.prices, dtype=float), np.ones(2))


def test_buy_offer_rejected(crossing):
    with pytest.raises(UnsupportedParticipant):
        solve_tatonnement(crossing)
    with pytest.raises(UnsupportedParticipant):
        aggregate_demand(crossing, [1.0, 1.0])


def test_single_cfmm_does_not_trade():
    inst = BatchInstance.from_symbols("AB", [CfmmDecl("w", (0, 1), [2.0, 3.0], WeightedProduct(1.0, 3.0))])
    sol = solve_tatonnement(inst)
    assert rate(sol) == pytest.approx((1 / 2) / (3 / 3), rel=1e-6)
    assert np.allclose(sol.trades, 0.0, atol=1e-6)


def test_lmsr_with_polish(lmsr):
    sol = solve_tatonnement(lmsr)
    assert rate(sol) == pytest.approx(0.5, rel=1e-9)
    assert -sol.trades[1, 0] == pytest.approx(LMSR_FILL, rel=1e-8)
    assert verify_solution(lmsr, sol).passed


@pytest.mark.parametrize("seed", range(6))
def test_three_asset_offers_match_convex(seed):
    inst = random_instance(np.random.default_rng(seed), 3, 8, families=("offer",))
    a = solve_tatonnement(inst)
    b = solve_convex(inst)
    assert verify_solution(inst, a).passed
    pa, pb = np.asarray(a.prices, float), np.asarray(b.prices, float)
    assert np.allclose(pa / pa[0], pb / pb[0], rtol=1e-5)


def test_cp_market_matches_convex():
    inst = BatchInstance.from_symbols("AB", [
        CfmmDecl("c", (0, 1), [1.0, 4.0], ConstantProduct()),
        CfmmDecl("d", (0, 1), [1.0, 9.0], ConstantProduct()),
    ])
    assert rate(solve_tatonnement(inst, TatonnementOptions(tol=1e-9))) == pytest.approx(6.5, rel=1e-6)


def test_options_validation():
    with pytest.raises(ValueError):
        TatonnementOptions(step=0.0)
