import numpy as np
import pytest

from cfmmbatch.convex import solve_convex
from cfmmbatch.errors import IncompleteSolution
from cfmmbatch.functions import ConstantProduct, apply_fee_wrapper
from cfmmbatch.market import BatchInstance, BatchSolution, CfmmDecl, LimitSellOffer, PriceVector
from cfmmbatch.tatonnement import solve_tatonnement
from cfmmbatch.verify import CHECKS, check_nobeyond, verify_solution


def solution(p, trades, tol=1e-9):
    return BatchSolution(PriceVector(np.asarray(p, dtype=float)), np.asarray(trades, dtype=float), info={"tol": tol})


def single_cp():
    return BatchInstance.from_symbols("AB", [CfmmDecl("cp", (0, 1), [1.0, 10.0], ConstantProduct())])


def test_report_shape(lmsr):
    rep = verify_solution(lmsr, solve_convex(lmsr))
    assert [c.name for c in rep] == list(CHECKS)
    assert rep.passed and rep.failed() == []
    assert rep.to_json()["passed"] is True
    assert rep.table().splitlines()[0].startswith("check")


def test_wrong_shape():
    with pytest.raises(IncompleteSolution):
        verify_solution(single_cp(), solution([1, 1], [[0, 0], [0, 0]]))


def test_cfmm_nondecreasing_violation():
    # sells 0.5 A for only 1 B: Walras holds at p = (2, 1) but the product drops
    rep = verify_solution(single_cp(), solution([2, 1], [[-0.5, 1.0]]))
    assert not rep["cfmm_nondecreasing"].passed
    assert rep["walras"].passed


def test_cfmm_independence_violation():
    # on the budget line, f grows, but the pool would sell 0.375 A at rate 40
    rep = verify_solution(single_cp(), solution([40, 1], [[-0.2, 8.0]]))
    assert not rep["cfmm_independence"].passed
    assert rep["walras"].passed and rep["cfmm_nondecreasing"].passed


def test_internal_arbitrage_between_idle_pools():
    inst = BatchInstance.from_symbols("AB", [
        CfmmDecl("c4", (0, 1), [1.0, 4.0], ConstantProduct()),
        CfmmDecl("c9", (0, 1), [1.0, 9.0], ConstantProduct()),
    ])
    rep = verify_solution(inst, solution([6.5, 1], [[0, 0], [0, 0]]))
    assert not rep["no_internal_arbitrage"].passed
    assert not rep["spot_alignment"].passed
    assert rep["walras"].passed and rep["conservation"].passed


def test_offer_left_unfilled():
    inst = BatchInstance.from_symbols("AB", [LimitSellOffer(0, 1, 1.0, 0.5)])
    rep = verify_solution(inst, solution([1, 1], [[0, 0]]))
    assert not rep["offer_limits"].passed
    assert "in the money" in rep["offer_limits"].detail


def test_offer_oversold():
    inst = BatchInstance.from_symbols("AB", [LimitSellOffer(0, 1, 1.0, 0.5)])
    rep = verify_solution(inst, solution([1, 1], [[-2, 2]]))
    assert "more than offered" in rep["offer_limits"].detail


def test_fee_kink_accepted():
    # an idle fee'd pool quotes any rate in [(1 - eps) s, s / (1 - eps)]
    fn = apply_fee_wrapper(ConstantProduct(), [1.0, 10.0], 0.05)
    inst = BatchInstance.from_symbols("AB", [CfmmDecl("f", (0, 1), [1.0, 10.0], fn)])
    assert verify_solution(inst, solution([10.3, 1], [[0, 0]])).passed
    assert not verify_solution(inst, solution([11, 1], [[0, 0]])).passed


@pytest.mark.parametrize("c", [1e-3, 1.0, 7.0, 1e4])
def test_price_scale_invariance(lmsr, c):
    sol = solve_convex(lmsr)
    p = np.asarray(sol.prices, dtype=float)
    a = verify_solution(lmsr, solution(p, sol.trades, 1e-8))
    b = verify_solution(lmsr, solution(c * p, sol.trades, 1e-8))
    assert [x.passed for x in a] == [x.passed for x in b]
    assert [x.residual for x in a] == pytest.approx([x.residual for x in b], abs=1e-15)


def test_nobeyond_passes_for_demand_response():
    # at rate 40 the pool (1, 10) sells 0.375 A for 15 B and lands on spot 40
    rep = check_nobeyond(single_cp(), solution([40, 1], [[-0.375, 15.0]]))
    assert rep.passed


def test_nobeyond_fails_past_batch_rate():
    # (10 + 21.25) / 0.625 = 50 overshoots the batch rate 40
    rep = check_nobeyond(single_cp(), solution([40, 1], [[-0.375, 21.25]]))
    assert not rep.passed
    assert rep.residual == pytest.approx(0.25)


def test_solver_outputs_verify(lmsr, cp_cs):
    for inst in (lmsr, cp_cs):
        assert verify_solution(inst, solve_convex(inst)).passed
    assert verify_solution(lmsr, solve_tatonnement(lmsr)).passed
