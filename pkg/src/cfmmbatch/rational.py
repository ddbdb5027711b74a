"""Exact rational equilibria for markets whose halves are piecewise linear in
value terms.

Write y_i = p_A * (amount of A sold by half i). For a hyperbolic half
(constant or weighted product) y_i = alpha*p_A - beta*p_B once the rate
clears its spot and 0 below; for a jump (constant sum, sell offer) y_i is
size*p_A above the rate, 0 below, anything in between at it. Conservation
says value sold equals value bought per asset, so once each half's regime is
known the equilibrium is a rational linear system. The regimes are read off
an approximate solution and confirmed exactly.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ActiveSetError, NotRational, UnsupportedParticipant
from .exact import to_fraction
from .functions import ConstantSum, FeeWrapped, HSpec, Monomial
from .market import BatchInstance, BatchSolution, CfmmDecl, LimitBuyOffer, LimitSellOffer, normalize_prices

log = logging.getLogger(__name__)

NEAR = 1e-7  # relative distance from a kink that counts as "at" it
MAX_CASES = 4096
NEAR_FILL = 1e-6  # fill fraction this close to 0 or 1 also tries the bound

HYPER, JUMP = "hyperbolic", "jump"
ACTIVE, IDLE, FULL, PARTIAL = "active", "idle", "full", "partial"


@dataclass
class ExactHalf:
    participant: int
    sell: int
    buy: int
    kind: str
    a: Fraction  # alpha, or jump size
    b: Fraction  # beta, or jump rate

    @property
    def spot(self) -> Fraction | None:
        if self.kind == JUMP:
            return self.b
        return self.b / self.a if self.a else None


@dataclass
class RationalSolution:
    prices: list[Fraction]
    values: list[Fraction]  # y per half
    amounts: list[Fraction]  # A sold per half
    trades: list[list[Fraction]]
    regimes: list[str]
    halves: list[ExactHalf] = field(repr=False, default_factory=list)

    @property
    def residual(self) -> Fraction:
        """Largest absolute per-asset net flow, computed exactly."""
        n = len(self.prices)
        flow = [sum((t[a] for t in self.trades), Fraction(0)) for a in range(n)]
        return max((abs(f) for f in flow), default=Fraction(0))

    def to_solution(self, solver: str = "rational") -> BatchSolution:
        p = np.array([float(x) for x in self.prices])
        trades = np.array([[float(x) for x in row] for row in self.trades]).reshape(len(self.trades), len(self.prices))
        return BatchSolution(normalize_prices(p), trades, 0.0, 0, solver=solver,
                             info={"exact": True, "tol": 1e-12})

    def to_json(self) -> dict:
        enc = lambda q: {"num": str(q.numerator), "den": str(q.denominator)}  # noqa: E731
        return {"prices": [enc(q) for q in self.prices], "trades": [[enc(q) for q in row] for row in self.trades]}


def _hyper_terms(fn, a0: Fraction, b0: Fraction):
    """(alpha, beta) of both halves of a two-asset product-type CFMM."""
    if isinstance(fn, Monomial):
        d = [to_fraction(e) for e in fn.exponents]
        da, db = d[0] / (d[0] + d[1]), d[1] / (d[0] + d[1])
        return (a0 * db, b0 * da), (b0 * da, a0 * db)
    c = to_fraction(fn.coefficients[0])
    keep = 1 - 1 / c
    return (a0 / c, b0 * keep), (b0 * keep, a0 / c)


def exact_halves(inst: BatchInstance) -> list[ExactHalf]:
    out: list[ExactHalf] = []
    for i, part in enumerate(inst.participants):
        if isinstance(part, LimitSellOffer):
            if part.amount > 0:
                out.append(ExactHalf(i, part.sell, part.buy, JUMP, to_fraction(part.amount), to_fraction(part.min_price)))
            continue
        if isinstance(part, LimitBuyOffer):
            raise UnsupportedParticipant(f"participant {i}: limit buy offers are outside the convex program")
        if not isinstance(part, CfmmDecl):
            raise UnsupportedParticipant(f"participant {i}: {type(part).__name__}")
        fn = part.function
        if isinstance(fn, FeeWrapped):
            fn = fn.base
        if len(part.assets) != 2:
            raise UnsupportedParticipant(f"participant {i}: CFMM {part.id} is not two-asset")
        a0, b0 = (to_fraction(v) for v in part.reserves)
        keep = 1 - to_fraction(part.fee)
        a, b = part.assets
        if isinstance(fn, ConstantSum):
            r = to_fraction(fn.rate)
            if a0 > 0:
                out.append(ExactHalf(i, a, b, JUMP, a0, r / keep))
            if b0 > 0:
                out.append(ExactHalf(i, b, a, JUMP, b0, 1 / r / keep))
        elif isinstance(fn, Monomial) and fn.n_assets == 2 or isinstance(fn, HSpec) and fn.coefficients.size == 1:
            for (al, be), (s, t) in zip(_hyper_terms(fn, a0, b0), ((a, b), (b, a))):
                if al > 0:
                    out.append(ExactHalf(i, s, t, HYPER, al, be / keep))
        else:
            raise NotRational(f"participant {i}: {fn.kind} demand is not rational-linear in the prices")
    return out


def _approx(inst: BatchInstance, approx):
    """(prices, per-participant trades or None) from a solution or a vector."""
    if isinstance(approx, BatchSolution):
        return np.asarray(approx.prices, dtype=float), np.asarray(approx.trades, dtype=float)
    return np.asarray(approx, dtype=float), None


def _candidates(h: ExactHalf, rho: float, fill: float | None = None) -> list[str]:
    """Regimes to try; ``fill`` is the approximate sold fraction of a jump."""
    spot = h.spot
    if h.kind == HYPER:
        if spot is None or spot == 0:
            return [ACTIVE]
        s = float(spot)
        if abs(rho / s - 1.0) <= NEAR:
            return [ACTIVE, IDLE]
        return [ACTIVE] if rho > s else [IDLE]
    s = float(spot)
    side = FULL if rho > s else IDLE
    if abs(rho / s - 1.0) > NEAR:
        return [side]
    if fill is None:
        return [PARTIAL, side]
    # pin the fill at a bound it sits on, so round-off in the hint cannot
    # push the free volume just outside [0, size]
    bounds = [b for b, near in ((IDLE, fill <= NEAR_FILL), (FULL, fill >= 1.0 - NEAR_FILL)) if near]
    return bounds + [PARTIAL]


def _rref(rows: list[list[Fraction]], ncols: int):
    """Row-reduce in place; returns pivot columns. Last column is the RHS."""
    piv = []
    r = 0
    for c in range(ncols):
        k = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if k is None:
            continue
        rows[r], rows[k] = rows[k], rows[r]
        inv = 1 / rows[r][c]
        rows[r] = [v * inv for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [vi - f * vr for vi, vr in zip(rows[i], rows[r])]
        piv.append(c)
        r += 1
        if r == len(rows):
            break
    for i in range(r, len(rows)):
        if rows[i][-1] != 0:
            return None
    return piv


def _components(n: int, halves: list[ExactHalf]) -> list[list[int]]:
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for h in halves:
        parent[find(h.sell)] = find(h.buy)
    groups: dict[int, list[int]] = {}
    for a in range(n):
        groups.setdefault(find(a), []).append(a)
    return list(groups.values())


def _solve_case(n, halves, regimes, p_hint, y_hint):
    """Exact (p, y) for one regime assignment, or None."""
    m = len(halves)
    ncols = n + m  # prices first so that leftover freedom lands on the y's
    rows: list[list[Fraction]] = []

    def eq(coefs: dict[int, Fraction], rhs=Fraction(0)):
        row = [Fraction(0)] * (ncols + 1)
        for c, v in coefs.items():
            row[c] += v
        row[-1] = rhs
        rows.append(row)

    for comp in _components(n, halves):
        root = comp[0]
        eq({root: Fraction(1)}, p_hint[root])
    for a in range(n):
        coefs: dict[int, Fraction] = {}
        for k, h in enumerate(halves):
            if h.sell == a:
                coefs[n + k] = coefs.get(n + k, 0) + 1
            elif h.buy == a:
                coefs[n + k] = coefs.get(n + k, 0) - 1
        if coefs:
            eq(coefs)
    for k, (h, reg) in enumerate(zip(halves, regimes)):
        if reg == IDLE:
            eq({n + k: Fraction(1)})
        elif reg == ACTIVE:
            eq({n + k: Fraction(1), h.sell: -h.a, h.buy: h.b})
        elif reg == FULL:
            eq({n + k: Fraction(1), h.sell: -h.a})
        else:
            eq({h.sell: Fraction(1), h.buy: -h.b})
    piv = _rref(rows, ncols)
    if piv is None:
        return None
    free = [c for c in range(ncols) if c not in piv]
    x = [Fraction(0)] * ncols
    for c in free:
        x[c] = p_hint[c] if c < n else y_hint[c - n]
    for r, c in enumerate(piv):
        x[c] = rows[r][-1] - sum((rows[r][f] * x[f] for f in free), Fraction(0))
    p, y = x[:n], x[n:]
    if any(v <= 0 for v in p):
        return None
    for h, reg, yk in zip(halves, regimes, y):
        pa, pb = p[h.sell], p[h.buy]
        if yk < 0:
            return None
        if reg == IDLE:
            above = h.a * pa > h.b * pb if h.kind == HYPER else pa > h.b * pb
            if above:
                return None
        elif reg == ACTIVE:
            pass  # y >= 0 is exactly alpha*p_A >= beta*p_B
        elif reg == FULL:
            if pa < h.b * pb:
                return None
        elif yk > h.a * pa:
            return None
    return p, y


def extract_rational(inst: BatchInstance, approx) -> RationalSolution:
    """Exact equilibrium near ``approx`` (a BatchSolution or price vector)."""
    halves = exact_halves(inst)
    n = inst.n_assets
    p_apx, t_apx = _approx(inst, approx)
    if p_apx.shape != (n,) or np.any(~(p_apx > 0)):
        raise ValueError("approximate prices must be a positive vector over the instance's assets")
    p_apx = p_apx / p_apx.min()
    rho = [p_apx[h.sell] / p_apx[h.buy] for h in halves]
    p_hint = [to_fraction(v) for v in p_apx]
    y_hint, options = [], []
    for h, r in zip(halves, rho):
        fill = None
        if t_apx is not None:
            sold = max(0.0, -float(t_apx[h.participant, h.sell]))
            if h.kind == JUMP:
                fill = sold / float(h.a)
        else:
            sold = float(h.a) / 2 if h.kind == JUMP else max(0.0, float(h.a) - float(h.b) / r)
        y_hint.append(to_fraction(sold * p_apx[h.sell]))
        options.append(_candidates(h, r, fill))
    cases = 1
    for o in options:
        cases *= len(o)
    if cases > MAX_CASES:
        raise ActiveSetError(f"{cases} regime assignments near kinks; perturb the approximate prices")
    for regimes in itertools.product(*options):
        got = _solve_case(n, halves, list(regimes), p_hint, y_hint)
        if got is None:
            continue
        p, y = got
        lo = min(p)
        p = [v / lo for v in p]
        y = [v / lo for v in y]
        amounts = [yk / p[h.sell] for h, yk in zip(halves, y)]
        trades = [[Fraction(0)] * n for _ in inst.participants]
        for h, yk, xk in zip(halves, y, amounts):
            trades[h.participant][h.sell] -= xk
            trades[h.participant][h.buy] += yk / p[h.buy]
        return RationalSolution(p, y, amounts, trades, list(regimes), halves)
    raise ActiveSetError("no regime assignment near the approximate solution is consistent")
