"""Tatonnement: raise the price of whatever is over-demanded.

Prices move multiplicatively, p_a <- p_a * (1 + lam * clip(Z_a / scale_a)),
with lam cut back whenever the worst scaled excess grows. Limit orders make
Z jump at their rates, so the iteration alone only brackets such a rate;
once some order sits within a hair of its limit the prices are snapped onto
it and the set-valued fills are chosen to clear exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .demand import clear_fills, excess, responses
from .density import instance_halves
from .errors import NotConverged, UnboundedDensity, UnsupportedParticipant, WrongArity
from .halfsystem import HalfSystem
from .functions import ConstantSum
from .market import BatchInstance, BatchSolution, CfmmDecl, LimitBuyOffer, LimitSellOffer, PriceVector, normalize_prices

log = logging.getLogger(__name__)

SNAP_BAND = 1e-6


@dataclass
class TatonnementOptions:
    step: float = 1.0
    min_step: float = 1e-12
    max_iters: int = 20000
    tol: float = 1e-6
    clip: float = 0.5
    stall_check: int = 200
    polish: bool = True
    diag: TextIO | None = None

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be > 0")


def _check(inst: BatchInstance):
    for i, part in enumerate(inst.participants):
        if isinstance(part, LimitBuyOffer):
            raise UnsupportedParticipant(f"participant {i}: limit buy offers are not WGS")


def aggregate_demand(inst: BatchInstance, p) -> np.ndarray:
    """Excess demand Z(p): bought minus sold per asset, midpoint fills."""
    _check(inst)
    p = np.asarray(p, dtype=float)
    if not inst.participants:
        return np.zeros(inst.n_assets)
    return excess(responses(inst, p), inst.n_assets)


def _limits(inst: BatchInstance):
    """(sell, buy, rate) for every participant with a jump in its demand."""
    out = []
    for part in inst.participants:
        if isinstance(part, LimitSellOffer) and part.amount > 0:
            out.append((part.sell, part.buy, part.min_price))
        elif isinstance(part, CfmmDecl) and isinstance(part.function, ConstantSum) and not part.fee:
            a, b = part.assets
            out.append((a, b, part.function.rate))
    return out


def _snap(p: np.ndarray, limits, band: float):
    """Move ln p the least distance that puts every near-limit rate exactly
    on its limit. None if no rate is near."""
    u = np.log(p)
    rows, rhs = [], []
    for a, b, r in limits:
        if abs(u[a] - u[b] - math.log(r)) <= band:
            row = np.zeros(p.size)
            row[a], row[b] = 1.0, -1.0
            rows.append(row)
            rhs.append(math.log(r))
    if not rows:
        return None
    A = np.array(rows)
    du = np.linalg.lstsq(A, np.array(rhs) - A @ u, rcond=None)[0]
    q = np.exp(u + du)
    # exact equality for the pinned ratios, up to one rounding
    for row, target in zip(rows, rhs):
        a, b = int(np.argmax(row)), int(np.argmin(row))
        if abs(math.log(q[a] / q[b]) - target) > 1e-9:
            return None
    return q


def _polish(inst: BatchInstance, p: np.ndarray, tol: float) -> BatchSolution | None:
    """Newton on the clearing equations from the current prices; only for
    markets that split into two-asset halves."""
    if not inst.options.get("tatonnement_polish", True):
        return None
    try:
        halves, _ = instance_halves(inst)
    except (UnsupportedParticipant, WrongArity, UnboundedDensity):
        return None
    if not halves:
        return None
    system = HalfSystem(halves, inst.n_assets, inst.scale())
    res = system.newton(p)
    if not res.converged:
        return None
    q = res.prices
    scale = inst.scale()
    rq = responses(inst, q)
    trades = np.zeros((len(inst.participants), inst.n_assets))
    rho = system.rates(q)
    for i, h in enumerate(halves):
        trades[h.participant, h.sell] -= res.amounts[i]
        trades[h.participant, h.buy] += res.amounts[i] * rho[i]
    resid = float(np.max(np.abs(trades.sum(axis=0)) / scale))
    if resid > tol:
        return None
    # the halves answer the same demand queries; keep the query-side answer
    # for every participant whose response is single-valued
    for k, r in enumerate(rq):
        if not r.set_valued and np.allclose(r.base, trades[k], rtol=1e-9, atol=1e-12 * scale.max()):
            trades[k] = r.base
    log.info("tatonnement stalled; finished by Newton on the clearing equations")
    return BatchSolution(normalize_prices(q), trades, resid, res.iterations, solver="tatonnement",
                         info={"residual": resid, "polished": True, "tol": tol})


def solve_tatonnement(inst: BatchInstance, opts: TatonnementOptions | None = None) -> BatchSolution:
    _check(inst)
    opts = opts or TatonnementOptions()
    n = inst.n_assets
    scale = inst.scale()
    if not inst.participants:
        return BatchSolution(PriceVector(np.ones(n)), np.zeros((0, n)), 0.0, 0, solver="tatonnement")
    limits = _limits(inst)
    p = np.ones(n)
    lam = np.full(n, opts.step)
    best = (math.inf, p)
    z_prev = np.zeros(n)
    stall_ref = math.inf
    if opts.diag is not None:
        opts.diag.write("iter,objective,grad_norm\n")
    for it in range(1, opts.max_iters + 1):
        resps = responses(inst, p)
        z = excess(resps, n) / scale
        worst = float(np.max(np.abs(z)))
        if opts.diag is not None:
            opts.diag.write(f"{it},{worst:.17g},{float(np.linalg.norm(z)):.6g}\n")
        if worst < best[0]:
            best = (worst, p)
        done = None
        if worst <= opts.tol:
            fills, res = clear_fills(resps, scale)
            done = (p, resps, fills, res)
        else:
            band = max(SNAP_BAND, opts.clip * float(np.max(lam)))
            q = _snap(p, limits, band)
            if q is not None:
                rq = responses(inst, q)
                fills, res = clear_fills(rq, scale)
                if res <= opts.tol:
                    done = (q, rq, fills, res)
        if done is not None:
            q, rq, fills, res = done
            trades = np.array([r.at(fills[k]) for k, r in enumerate(rq)])
            pv = normalize_prices(q)
            return BatchSolution(pv, trades, res, it, solver="tatonnement", info={"residual": res, "tol": opts.tol})
        # per-asset step: shrink on a sign flip of that asset's excess, else grow back
        flip = z * z_prev < 0
        lam = np.where(flip, lam * 0.5, np.minimum(lam * 1.2, opts.step))
        if np.max(lam) < opts.min_step:
            break
        if it % opts.stall_check == 0:
            if worst > 0.5 * stall_ref:
                polished = _polish(inst, p, opts.tol)
                if polished is not None:
                    polished.iterations += it
                    return polished
            stall_ref = best[0]
        z_prev = z
        p = p * (1.0 + lam * np.clip(z, -opts.clip, opts.clip))
        p = p / p.min()
    worst, p = best
    polished = _polish(inst, p, opts.tol)
    if polished is not None:
        polished.iterations += opts.max_iters
        return polished
    raise NotConverged(
        f"tatonnement stopped at scaled excess {worst:.3g} (tol {opts.tol:g})",
        best=normalize_prices(p),
        residuals=aggregate_demand(inst, p) / scale,
    )
