"""Demand queries over a whole instance.

Every participant's response at valuations p is an affine segment
base + t * direction, t in [0, 1]; direction is zero unless the response
is set-valued (a limit offer or constant-sum CFMM at exactly its rate).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import lsq_linear

from .errors import UnsupportedParticipant
from .functions import offer_demand
from .market import BatchInstance, CfmmDecl, LimitBuyOffer, LimitSellOffer


@dataclass
class Response:
    base: np.ndarray
    direction: np.ndarray

    @property
    def set_valued(self) -> bool:
        return bool(np.any(self.direction != 0))

    def at(self, t: float) -> np.ndarray:
        return self.base + t * self.direction


def respond(part, p: np.ndarray, n: int) -> Response:
    """One participant's trade at valuations ``p`` (global asset order)."""
    if isinstance(part, (LimitSellOffer, LimitBuyOffer)):
        r = offer_demand(part, p)
        lo = r.delta(n, r.sold_range[0])
        hi = r.delta(n, r.sold_range[1])
        return Response(lo, hi - lo)
    if isinstance(part, CfmmDecl):
        idx = list(part.assets)
        fn = part.effective_function()
        res = fn.demand(part.reserves, p[idx])
        base = np.zeros(n)
        direction = np.zeros(n)
        if res.sold_range is not None and res.sold_range[0] != res.sold_range[1]:
            rho = p[idx[0]] / p[idx[1]]
            lo, hi = res.sold_range
            base[idx] = (-lo, lo * rho)
            direction[idx] = (-(hi - lo), (hi - lo) * rho)
        else:
            base[idx] = res.delta
        return Response(base, direction)
    raise UnsupportedParticipant(f"{type(part).__name__} cannot answer demand queries")


def responses(inst: BatchInstance, p) -> list[Response]:
    p = np.asarray(p, dtype=float)
    return [respond(part, p, inst.n_assets) for part in inst.participants]


def excess(resps: list[Response], n: int, fills=None) -> np.ndarray:
    """Aggregate net trade; set-valued responses at ``fills`` (default midpoint)."""
    z = np.zeros(n)
    for k, r in enumerate(resps):
        z += r.at(0.5 if fills is None else fills[k])
    return z


def clear_fills(resps: list[Response], scale: np.ndarray) -> tuple[np.ndarray, float]:
    """Fills in [0, 1] for the set-valued responses that best clear the
    market (bounded least squares). Returns (fills, max scaled residual)."""
    n = scale.size
    fills = np.full(len(resps), 0.5)
    free = [k for k, r in enumerate(resps) if r.set_valued]
    fixed = sum((r.base for r in resps), np.zeros(n))
    if not free:
        return fills, float(np.max(np.abs(fixed) / scale, initial=0.0))
    A = np.column_stack([resps[k].direction / scale for k in free])
    sol = lsq_linear(A, -fixed / scale, bounds=(0.0, 1.0), method="bvls", tol=1e-15)
    fills[free] = sol.x
    z = fixed + sum(resps[k].direction * fills[k] for k in free)
    return fills, float(np.max(np.abs(z) / scale, initial=0.0))
