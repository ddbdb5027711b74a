import io
import math

import numpy as np
import pytest

from cfmmbatch.convex import Program, ProgramState, SolveOptions, gradient, objective, random_state, solve_convex
from cfmmbatch.errors import InfeasibleState, NotConverged
from cfmmbatch.functions import ConstantProduct
from cfmmbatch.generate import random_instance
from cfmmbatch.market import BatchInstance, CfmmDecl, LimitSellOffer
from cfmmbatch.verify import verify_solution
from conftest import LMSR_FILL, rate


def cp(x0, y0, cid="cp"):
    return CfmmDecl(cid, (0, 1), [x0, y0], ConstantProduct())


def two_pools():
    return BatchInstance.from_symbols("AB", [cp(1.0, 4.0, "c4"), cp(1.0, 9.0, "c9")])


def test_objective_closed_form_at_origin():
    inst = BatchInstance.from_symbols("AB", [cp(1.0, 10.0)])
    val = objective(inst, ProgramState([1.0, 1.0], [0.0, 0.0]))
    assert val == pytest.approx(5 * math.log(10) - 4.5, rel=1e-14)
    assert val == pytest.approx(7.012925, abs=1e-6)


def test_objective_rejects_infeasible_states():
    inst = BatchInstance.from_symbols("AB", [cp(1.0, 10.0)])
    with pytest.raises(InfeasibleState):
        objective(inst, ProgramState([0.5, 1.0], [0.0, 0.0]))
    with pytest.raises(InfeasibleState):
        objective(inst, ProgramState([1.0, 1.0], [1.0, 0.0]))  # flow not conserved
    with pytest.raises(InfeasibleState):
        objective(inst, ProgramState([1.0, 1.0], [1.0, 1.0]))  # A half sells beyond D(inf) = 0.5


@pytest.mark.parametrize("seed", range(5))
def test_nonnegative_on_random_states(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 3, 6)
    for _ in range(50):
        state = random_state(inst, rng)
        assert objective(inst, state) >= -1e-9


@pytest.mark.parametrize("seed", range(4))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    inst = random_instance(rng, 3, 5, families=("cp", "weighted"))
    prog = Program(inst)
    state = random_state(inst, rng)
    state = ProgramState(state.p, 0.9 * state.y)  # off the caps, still conserved
    gp, gy = gradient(inst, state)
    h = 1e-6
    for a in range(inst.n_assets):
        up = state.p.copy()
        up[a] *= 1 + h
        dn = state.p.copy()
        dn[a] *= 1 - h if dn[a] * (1 - h) >= 1 else 1
        f_up = objective(inst, ProgramState(up, state.y))
        f_dn = objective(inst, ProgramState(dn, state.y))
        fd = (f_up - f_dn) / (up[a] - dn[a])
        assert gp[a] == pytest.approx(fd, rel=1e-4, abs=1e-6)
    # along a conservation-preserving direction through the halves strictly inside their bounds
    ub = state.p[prog.sell] * prog.total
    inside = np.flatnonzero((state.y > 1e-9) & (state.y < ub - 1e-9))
    sub = prog.N[:, inside]
    _, _, vt = np.linalg.svd(sub)
    null = vt[np.linalg.matrix_rank(sub):]
    if null.size == 0:
        return
    d = np.zeros(prog.size)
    d[inside] = null[0]
    live = np.abs(d) > 0
    room = np.min(np.minimum(state.y, ub - state.y)[live] / np.abs(d[live]))
    step = min(1e-6, 0.1 * room)
    fd = (objective(inst, ProgramState(state.p, state.y + step * d))
          - objective(inst, ProgramState(state.p, state.y - step * d))) / (2 * step)
    assert gy @ d == pytest.approx(fd, rel=1e-4, abs=1e-6)


def test_zero_at_equilibrium():
    inst = two_pools()
    sol = solve_convex(inst)
    prog = Program(inst)
    p = np.asarray(sol.prices, dtype=float)
    y = prog.equilibrium_y(p)
    assert objective(inst, ProgramState(p, y)) == pytest.approx(0.0, abs=1e-10)


def test_two_pools_clear_at_closed_form_rate():
    # each pool holds half its value in A: (r + 4)/(2r) + (r + 9)/(2r) = 2
    sol = solve_convex(two_pools())
    assert rate(sol) == pytest.approx(6.5, rel=1e-9)
    assert sol.trades[0, 0] == pytest.approx(10.5 / 13 - 1, rel=1e-8)
    assert sol.trades[1, 0] == pytest.approx(15.5 / 13 - 1, rel=1e-8)
    assert verify_solution(two_pools(), sol).passed


def test_lmsr_against_offer(lmsr):
    sol = solve_convex(lmsr)
    assert rate(sol) == pytest.approx(0.5, rel=1e-9)
    assert -sol.trades[1, 0] == pytest.approx(LMSR_FILL, rel=1e-8)
    assert verify_solution(lmsr, sol).passed


def test_no_trade_market():
    inst = BatchInstance.from_symbols("AB", [cp(1.0, 10.0)])
    sol = solve_convex(inst)
    assert rate(sol) == pytest.approx(10.0, rel=1e-9)
    assert np.allclose(sol.trades, 0.0, atol=1e-12)


def test_offers_only():
    inst = BatchInstance.from_symbols("AB", [LimitSellOffer(0, 1, 2.0, 1.0), LimitSellOffer(1, 0, 3.0, 0.5)])
    sol = solve_convex(inst)
    assert verify_solution(inst, sol).passed


def test_not_converged_carries_best_state():
    inst = two_pools()
    with pytest.raises(NotConverged) as info:
        solve_convex(inst, SolveOptions(max_iters=1, polish=False, tol=1e-14))
    assert isinstance(info.value.best, ProgramState)


def test_diag_csv():
    buf = io.StringIO()
    solve_convex(two_pools(), SolveOptions(diag=buf))
    lines = buf.getvalue().splitlines()
    assert lines[0] == "iter,objective,grad_norm"
    assert len(lines) > 1


@pytest.mark.parametrize("seed", range(10))
def test_random_instances_verify(seed):
    inst = random_instance(np.random.default_rng(seed), 4, 8)
    assert verify_solution(inst, solve_convex(inst)).passed
