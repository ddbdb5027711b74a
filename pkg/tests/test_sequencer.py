import io

import numpy as np
import pytest

from cfmmbatch.errors import InstanceError, UnknownCfmm
from cfmmbatch.functions import ConstantProduct, Lmsr
from cfmmbatch.market import BatchInstance, CfmmDecl, LimitSellOffer
from cfmmbatch.reference import solve_two_asset
from cfmmbatch.sequencer import run_sequence, write_rates_csv


def pool(fee=0.0, reserves=(10.0, 10.0), cid="pool"):
    return CfmmDecl(cid, (0, 1), list(reserves), ConstantProduct(), fee)


def batch(*parts, symbols="AB"):
    return BatchInstance.from_symbols(symbols, list(parts))


def test_empty_sequence():
    res = run_sequence([])
    assert res.solutions == [] and res.passed


def test_reserves_carry_over():
    # the pool takes all 5 A at rate 1/2 and lands on spot 7.5 / 15 = 1/2
    res = run_sequence([batch(pool(), LimitSellOffer(0, 1, 5.0, 0.5)), batch()])
    assert res.passed
    assert np.allclose(res.trajectory[0]["pool"], [15.0, 7.5], rtol=1e-9)
    assert np.allclose(res.reserves["pool"], [15.0, 7.5], rtol=1e-9)
    rates = [p[0] / p[1] for p in res.rates()]
    assert rates == pytest.approx([0.5, 0.5], rel=1e-9)
    assert np.allclose(res.solutions[1].trades, 0.0, atol=1e-12)


def test_lmsr_then_idle(lmsr):
    for solver in (None, solve_two_asset):
        res = run_sequence([lmsr, batch()], solver=solver)
        p = res.rates()[1]
        assert p[0] / p[1] == pytest.approx(0.5, rel=1e-8)
        assert np.allclose(res.solutions[1].trades, 0.0, atol=1e-9)


def test_fee_sink_vs_deposit():
    first = [batch(pool(0.01), LimitSellOffer(0, 1, 5.0, 0.5)), batch()]
    sink = run_sequence(first)
    dep = run_sequence(first, carry_fee_deposit=True)
    t = sink.solutions[0].trades[0]
    assert t[0] > 0 and t[1] < 0  # the pool buys A
    assert sink.fee_sink["pool"] == pytest.approx([0.01 * t[0], 0.0], rel=1e-12)
    assert dep.fee_sink == {}
    assert dep.reserves["pool"][0] - sink.reserves["pool"][0] == pytest.approx(0.01 * t[0], rel=1e-9)
    total = sink.reserves["pool"] + sink.fee_sink["pool"]
    assert total == pytest.approx(dep.reserves["pool"], rel=1e-12)


def test_later_batch_may_restate_pool():
    # declared reserves in later batches are ignored in favour of carried ones
    res = run_sequence([batch(pool(), LimitSellOffer(0, 1, 5.0, 0.5)), batch(pool(reserves=(1.0, 1.0)))])
    assert res.instances[1].participants[0].reserves == pytest.approx([15.0, 7.5])


def test_unknown_and_changed_pools():
    with pytest.raises(UnknownCfmm):
        run_sequence([batch(pool()), batch(pool(cid="other"))])
    moved = CfmmDecl("pool", (1, 0), [10.0, 10.0], ConstantProduct())
    with pytest.raises(UnknownCfmm):
        run_sequence([batch(pool()), batch(moved)])


def test_asset_list_must_match():
    with pytest.raises(InstanceError):
        run_sequence([batch(pool()), batch(symbols="ABC")])


def test_duplicate_declaration():
    with pytest.raises(InstanceError):
        run_sequence([batch(pool(), pool())])


def test_assets_conserved_without_fees():
    batches = [batch(pool(), LimitSellOffer(0, 1, 5.0, 0.5)), batch(LimitSellOffer(1, 0, 3.0, 0.2)), batch()]
    res = run_sequence(batches)
    held = np.array([10.0, 10.0])
    for sol, inst in zip(res.solutions, res.instances):
        held = held + sol.trades[[i for i, _ in inst.cfmms()][0]]
    assert held == pytest.approx(res.reserves["pool"], rel=1e-12)


def test_rates_csv():
    res = run_sequence([batch(CfmmDecl("m", (0, 1), [1.0, 1.0], Lmsr()), LimitSellOffer(0, 1, 100.0, 0.5))])
    buf = io.StringIO()
    write_rates_csv(res, ["A", "B"], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "batch,A,B"
    a, b = (float(v) for v in lines[1].split(",")[1:])
    assert a / b == pytest.approx(0.5, rel=1e-8)
