"""The convex program whose zero-value minimizers are exactly the batch
equilibria of two-asset WGS markets.

Variables are valuations p >= 1 and per-half valuation-weighted volumes
y >= 0 with flow conservation N y = 0. Per half (selling A for B, rate
rho = p_A/p_B, x = y/p_A) the objective contributes

    p_A * (phi(rho) + negg(x))

which is >= y ln rho, with equality iff x = D(rho). Summed over halves the
y ln rho terms cancel under conservation, so the optimum is 0.

The solver runs projected gradient with backtracking on (p, y) and then
polishes with Newton on the clearing equations (limit orders smoothed
first, then solved exactly); the objective at the returned state is
certified <= tol.
"""

from __future__ import annotations

import logging
import math
import weakref
from dataclasses import dataclass, replace
from typing import TextIO

import numpy as np

from . import kernels
from .density import FunctionHalf, instance_halves, table_half
from .errors import InfeasibleState, NotConverged, UnsupportedParticipant
from .halfsystem import HalfSystem
from .market import BatchInstance, BatchSolution, PriceVector

log = logging.getLogger(__name__)


@dataclass
class SolveOptions:
    max_iters: int = 2000
    step: float = 0.1
    tol: float = 1e-8
    proj_tol: float = 1e-12
    polish: bool = True
    diag: TextIO | None = None


@dataclass
class ProgramState:
    p: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.y = np.asarray(self.y, dtype=float)


class Program:
    """The program for one instance. ``fast=True`` swaps numeric halves for
    their tabulated versions (used while iterating)."""

    def __init__(self, inst: BatchInstance, fast: bool = False):
        self.inst = inst
        halves, _ = instance_halves(inst)
        self.halves = halves
        self.n = inst.n_assets
        self.system = HalfSystem(halves, self.n, inst.scale(), fast_generic=fast)
        self.sell, self.buy = self.system.sell, self.system.buy
        self.kind, self.p0, self.p1 = self.system.kind, self.system.p0, self.system.p1
        self.generic = self.system.generic
        self.total = self.system.total
        m = len(halves)
        self.N = np.zeros((self.n, m))
        self.N[self.sell, np.arange(m)] += 1.0
        self.N[self.buy, np.arange(m)] -= 1.0
        self.nonmonotone = [i for i, h in enumerate(halves) if not h.density.monotone]

    @property
    def size(self) -> int:
        return len(self.halves)

    def terms(self, p, y):
        """Per-half objective terms and partials (pa, pb, y)."""
        pa, pb = p[self.sell], p[self.buy]
        obj, ga, gb, gy = kernels.convex_terms(self.kind, self.p0, self.p1, pa, pb, y)
        for i, h in self.generic:
            rho, x = pa[i] / pb[i], y[i] / pa[i]
            if x > h.total * (1 + 1e-12):
                obj[i], ga[i], gb[i], gy[i] = math.inf, math.nan, math.nan, math.inf
                continue
            x = min(x, h.total)
            phi = float(h.phi(rho))
            d = float(h.sold(rho))
            ng = float(h.negg(x))
            lq = float(h.lnq(x)) if x > 0 else math.log(h.spot)
            obj[i] = pa[i] * (phi + ng)
            ga[i] = phi + d + ng - (x * lq if x > 0 else 0.0)
            gb[i] = -rho * d
            gy[i] = lq
        return obj, ga, gb, gy

    def value(self, p, y) -> float:
        obj = self.terms(p, y)[0]
        return float(np.sum(obj)) if obj.size else 0.0

    def value_grad(self, p, y):
        obj, ga, gb, gy = self.terms(p, y)
        gp = np.zeros(self.n)
        np.add.at(gp, self.sell, ga)
        np.add.at(gp, self.buy, gb)
        return (float(np.sum(obj)) if obj.size else 0.0), gp, gy

    def feasible(self, p, y, tol: float = 1e-9) -> bool:
        if np.any(p < 1 - tol) or np.any(y < -tol * max(1.0, np.max(np.abs(y), initial=0))):
            return False
        flow = self.N @ y
        return bool(np.max(np.abs(flow), initial=0.0) <= tol * max(1.0, np.sum(np.abs(y))))

    def equilibrium_y(self, p) -> np.ndarray:
        return p[self.sell] * self.system.sold(self.system.rates(p))

    def project_y(self, y0, ub, tol: float = 1e-12, max_iter: int = 100) -> np.ndarray:
        """Euclidean projection onto {N y = 0, 0 <= y <= ub} via a semismooth
        Newton method on the dual; Dykstra's alternating projections back it up."""
        N = self.N
        lam = np.zeros(self.n)
        scale = max(1.0, float(np.max(np.abs(y0), initial=0.0)))

        def primal(l):
            return np.clip(y0 + N.T @ l, 0.0, ub)

        y = primal(lam)
        for _ in range(max_iter):
            g = N @ y
            if np.max(np.abs(g), initial=0.0) <= tol * scale:
                return y
            v = y0 + N.T @ lam
            act = ((v >= 0) & (v < ub)).astype(float)
            H = (N * act) @ N.T
            H += 1e-12 * (np.trace(H) / self.n + 1.0) * np.eye(self.n)
            d = -np.linalg.solve(H, g)
            lam = lam + _exact_step(v, N.T @ d, ub) * d
            y = primal(lam)
        return self._dykstra(y0, ub, tol * scale)

    def _dykstra(self, y0, ub, tol, max_iter=20000):
        N = self.N
        Np = np.linalg.pinv(N)
        y, pp, qq = y0.copy(), np.zeros_like(y0), np.zeros_like(y0)
        for _ in range(max_iter):
            a = y + pp
            z = a - Np @ (N @ a)
            pp = a - z
            b = z + qq
            y = np.clip(b, 0.0, ub)
            qq = b - y
            if np.max(np.abs(N @ y), initial=0.0) <= tol:
                break
        return y


def _exact_step(v, a, ub) -> float:
    """Minimizer over t >= 0 of the dual along a direction: the root of the
    nondecreasing piecewise-linear t -> sum a_i clip(v_i + t a_i, 0, ub_i)."""

    def slope(t):
        return np.clip(v[:, None] + np.outer(a, t), 0.0, ub[:, None]).T @ a

    with np.errstate(divide="ignore", invalid="ignore"):
        bp = np.concatenate([-v / a, (ub - v) / a])
    bp = np.unique(bp[np.isfinite(bp) & (bp > 0)])
    if bp.size == 0:
        return 1.0
    vals = slope(np.concatenate([[0.0], bp]))
    if vals[0] >= 0:
        return 0.0
    k = int(np.searchsorted(vals >= 0, True))
    if k == vals.size:
        # still descending past the last breakpoint: the slope is constant there
        return float(bp[-1]) if vals[-1] == vals[-2] else float(bp[-1]) * 2
    t0 = 0.0 if k == 1 else float(bp[k - 2])
    t1, f0, f1 = float(bp[k - 1]), float(vals[k - 1]), float(vals[k])
    return t0 + (t1 - t0) * (-f0) / (f1 - f0)


_PROGRAMS: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def _program(inst: BatchInstance) -> Program:
    prog = _PROGRAMS.get(inst)
    if prog is None:
        prog = Program(inst)
        _PROGRAMS[inst] = prog
    return prog


def objective(inst: BatchInstance, state: ProgramState) -> float:
    prog = _program(inst)
    if not prog.feasible(state.p, state.y):
        raise InfeasibleState("state violates p >= 1, y >= 0 or flow conservation")
    val = prog.value(state.p, state.y)
    if not np.isfinite(val):
        raise InfeasibleState("a half is asked to sell beyond D(inf)")
    return val


def gradient(inst: BatchInstance, state: ProgramState):
    """(d/dp, d/dy) of the objective; left derivatives at kinks."""
    prog = _program(inst)
    if not prog.feasible(state.p, state.y):
        raise InfeasibleState("state violates p >= 1, y >= 0 or flow conservation")
    _, gp, gy = prog.value_grad(state.p, state.y)
    return gp, gy


def random_state(inst: BatchInstance, rng: np.random.Generator, spread: float = 1.5) -> ProgramState:
    """A feasible state: p >= 1 log-uniform over ``spread`` decades, y drawn
    inside its bounds and projected onto flow conservation."""
    prog = _program(inst)
    p = 10.0 ** rng.uniform(0.0, spread, prog.n)
    ub = p[prog.sell] * prog.total
    y = prog.project_y(rng.uniform(0.0, 1.0, prog.size) * ub, ub)
    return ProgramState(p, np.clip(y, 0.0, ub))


def _gradient_phase(prog: Program, opts: SolveOptions, p, y):
    """Projected gradient with backtracking; step scale c/sqrt(t)."""
    scale = prog.inst.scale()
    f, gp, gy = prog.value_grad(p, y)
    history = [f]
    t_step = opts.step
    it = 0
    for it in range(1, opts.max_iters + 1):
        # steps in (ln p, y) measured in units of total market value V
        value = float(p @ scale)
        du = -gp * p / value
        dy = -np.clip(gy, -50.0, 50.0) * value  # ln Q is +inf at D(inf)
        step = t_step
        accepted = False
        while step > 1e-14:
            p2 = np.maximum(p * np.exp(np.clip(step * du, -1.0, 1.0)), 1.0)
            ub = p2[prog.sell] * prog.total
            y2 = prog.project_y(y + step * dy, ub, opts.proj_tol)
            f2, gp2, gy2 = prog.value_grad(p2, y2)
            if np.isfinite(f2) and f2 < f:
                accepted = True
                break
            step *= 0.5
        if opts.diag is not None:
            opts.diag.write(f"{it},{f:.17g},{math.sqrt(float(gp @ gp + gy @ gy)):.6g}\n")
        if not accepted:
            break
        p, y, f, gp, gy = p2, y2, f2, gp2, gy2
        history.append(f)
        t_step = min(opts.step * 10, step * 2) / math.sqrt(1 + it / 100)
        if f <= opts.tol * 0.1:
            break
    return p, y, f, it


def _trades(inst: BatchInstance, prog: Program, p, amounts) -> np.ndarray:
    trades = np.zeros((len(inst.participants), inst.n_assets))
    rho = prog.system.rates(p)
    for i, h in enumerate(prog.halves):
        trades[h.participant, h.sell] -= amounts[i]
        trades[h.participant, h.buy] += amounts[i] * rho[i]
    return trades


def solve_convex(inst: BatchInstance, opts: SolveOptions | None = None) -> BatchSolution:
    """Minimize the program to (certified) zero and read off the equilibrium."""
    opts = opts or SolveOptions(tol=float(inst.options.get("tol", 1e-8)))
    prog = _program(inst)
    fast = Program(inst, fast=True) if prog.generic else prog
    n = inst.n_assets
    if prog.size == 0:
        p = np.ones(n)
        return BatchSolution(PriceVector(p), np.zeros((len(inst.participants), n)), 0.0, 0, solver="convex")
    if opts.diag is not None:
        opts.diag.write("iter,objective,grad_norm\n")
    p, y = np.ones(n), np.zeros(prog.size)
    total_iters = 0
    best = None

    def consider(p_new, amounts):
        nonlocal best
        y_new = np.minimum(p_new[prog.sell] * amounts, p_new[prog.sell] * prog.total)
        val = prog.value(p_new, y_new)
        if best is None or val < best[0]:
            best = (val, p_new, y_new, amounts)
        return val <= opts.tol

    # a short gradient phase locates the basin; the polish (smoothed
    # continuation, then the exact semismooth system) finishes it
    budgets = [min(opts.max_iters, 100), opts.max_iters] if opts.polish else [opts.max_iters]
    done = False
    for budget in budgets:
        p, y, f, it = _gradient_phase(fast, replace(opts, max_iters=budget), p, y)
        total_iters += it
        val = prog.value(p, y)
        if best is None or val < best[0]:
            best = (val, p, y, y / p[prog.sell])
        if not opts.polish:
            if val <= opts.tol:
                break
            continue
        # the objective grows like the square of the price error, so a small
        # value alone is a loose certificate: polish even when it is met
        for start in (p, np.ones(n)):
            res = prog.system.newton(start)
            total_iters += res.iterations
            if res.converged and consider(res.prices, res.amounts):
                done = True
                break
        if done or val <= opts.tol:
            break
    val, p, y, amounts = best
    for i in prog.nonmonotone:
        dens = prog.halves[i].density
        if isinstance(dens, FunctionHalf) and prog.system.rates(p)[i] > dens.peak * (1 + 1e-9):
            raise UnsupportedParticipant(
                f"participant {prog.halves[i].participant}: clears on the falling part of a non-WGS density"
            )
    if not val <= opts.tol:
        raise NotConverged(
            f"objective {val:.3g} above tolerance {opts.tol:g}",
            best=ProgramState(p, y),
            residuals=prog.system.excess(p, amounts),
        )
    trades = _trades(inst, prog, p, amounts)
    info = {"y": y.tolist(), "halves": [(h.participant, h.sell, h.buy) for h in prog.halves]}
    return BatchSolution(PriceVector(p), trades, val, total_iters, solver="convex", info=info)
