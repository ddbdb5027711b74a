"""Two-asset ground truth: bisection on the rate, or a dense grid scan when
excess demand need not be monotone (buy offers, non-WGS curves).

The rate is rho = p_A / p_B (units of B per A); prices are (rho, 1) before
normalization. Z(rho) is the excess demand for A, an interval wherever some
participant is indifferent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import optimize

from . import kernels
from .demand import clear_fills, responses
from .density import GENERIC, FunctionHalf, instance_halves
from .errors import NoEquilibriumFound, WrongArity
from .exact import to_fraction
from .functions import ConstantProduct, Monomial
from .market import BatchInstance, BatchSolution, CfmmDecl, LimitBuyOffer, LimitSellOffer, normalize_prices


@dataclass
class ReferenceOptions:
    grid: int = 1_000_000
    xtol: float = 1e-12
    tol: float = 1e-8
    span: float = 1e3  # grid reaches this factor beyond the extreme participant rates


def _require_two(inst: BatchInstance):
    if inst.n_assets != 2:
        raise WrongArity(f"the reference solver handles 2 assets, got {inst.n_assets}")


def _prices(rho: float) -> np.ndarray:
    return np.array([rho, 1.0])


def excess_interval(inst: BatchInstance, rho: float) -> tuple[float, float]:
    """(min, max) of the excess demand for asset A at rate rho."""
    lo = hi = 0.0
    for r in responses(inst, _prices(rho)):
        b, d = r.base[0], r.direction[0]
        lo += b + min(d, 0.0)
        hi += b + max(d, 0.0)
    return lo, hi


def _monotone(inst: BatchInstance) -> bool:
    for part in inst.participants:
        if isinstance(part, LimitBuyOffer):
            return False
        if isinstance(part, CfmmDecl) and not getattr(part.function, "wgs", True):
            return False
    return True


def _anchor_rates(inst: BatchInstance) -> list[float]:
    """Rates at which some participant changes behaviour (spots, limits)."""
    out = []
    for part in inst.participants:
        if isinstance(part, LimitSellOffer):
            out.append(part.min_price if part.sell == 0 else 1.0 / part.min_price)
        elif isinstance(part, LimitBuyOffer):
            out.append(part.limit_price if part.sell == 0 else 1.0 / part.limit_price)
        elif isinstance(part, CfmmDecl):
            try:
                g = part.effective_function().gradient(part.reserves)
                s = float(g[0] / g[1])
                if part.assets[0] == 1:
                    s = 1.0 / s
                if np.isfinite(s) and s > 0:
                    out.append(s)
            except Exception:  # noqa: BLE001 - a spot is only a hint here
                continue
            rate = getattr(part.function, "rate", None)
            if rate:
                out.append(rate if part.assets[0] == 0 else 1.0 / rate)
    return [r for r in out if np.isfinite(r) and r > 0] or [1.0]


def _jump_rates(inst: BatchInstance) -> list[float]:
    out = []
    for part in inst.participants:
        if isinstance(part, LimitSellOffer):
            out.append(part.min_price if part.sell == 0 else 1.0 / part.min_price)
        elif isinstance(part, LimitBuyOffer):
            out.append(part.limit_price if part.sell == 0 else 1.0 / part.limit_price)
        elif isinstance(part, CfmmDecl) and getattr(part.function, "kind", "") == "constant_sum":
            r = part.function.rate / (1.0 - part.fee) if part.fee else part.function.rate
            out.append(r if part.assets[0] == 0 else 1.0 / r)
            if part.fee:
                r2 = part.function.rate * (1.0 - part.fee)
                out.append(r2 if part.assets[0] == 0 else 1.0 / r2)
    return out


def _sign(iv: tuple[float, float], eps: float) -> int:
    if iv[0] > eps:
        return 1
    if iv[1] < -eps:
        return -1
    return 0


def _refine(inst: BatchInstance, lo: float, hi: float, s_lo: int, xtol: float, eps: float) -> float:
    """Bisect in log rate between a point of sign s_lo and one of -s_lo."""
    for _ in range(200):
        if hi / lo - 1.0 <= xtol:
            break
        mid = math.sqrt(lo * hi)
        s = _sign(excess_interval(inst, mid), eps)
        if s == 0:
            for r in _jump_rates(inst):
                if abs(r / mid - 1.0) <= 1e-9 and _sign(excess_interval(inst, r), eps) == 0:
                    return r
            return mid
        if s == s_lo:
            lo = mid
        else:
            hi = mid
    # a limit rate inside the final bracket is where the jump happened
    for r in _jump_rates(inst):
        if lo <= r <= hi and _sign(excess_interval(inst, r), eps) == 0:
            return r
    return math.sqrt(lo * hi)


def _grid_excess(inst: BatchInstance, grid: np.ndarray) -> np.ndarray:
    """Excess demand for A at every grid rate (left-continuous jumps)."""
    halves, skipped = instance_halves(inst, allow_buy=True)
    kind = np.array([h.density.kernel_params()[0] if h.density.kernel_params() else GENERIC for h in halves], dtype=np.int64)
    p0 = np.array([h.density.kernel_params()[1] if h.density.kernel_params() else 0.0 for h in halves])
    p1 = np.array([h.density.kernel_params()[2] if h.density.kernel_params() else 0.0 for h in halves])
    side = np.array([0 if h.sell == 0 else 1 for h in halves], dtype=np.int64)
    z = kernels.excess_grid(kind, p0, p1, side, grid) if halves else np.zeros(grid.size)
    inv = 1.0 / grid
    for h, k, s in zip(halves, kind, side):
        if k != GENERIC:
            continue
        dens = h.density
        zz = grid if s == 0 else inv
        if isinstance(dens, FunctionHalf):
            # the true response, not the monotone envelope
            d = np.where(zz > dens.spot, np.clip(dens.raw(zz), 0.0, None), 0.0)
        else:
            d = dens.sold(zz)
        z += -d if s == 0 else d * inv
    for i in skipped:
        part = inst.participants[i]
        if part.sell == 0:
            live = grid > part.limit_price
            z -= np.where(live, np.minimum(part.endowment_amount, part.amount / grid), 0.0)
        else:
            r = inv
            live = r > part.limit_price
            q = np.where(live, np.minimum(part.endowment_amount, part.amount / r), 0.0)
            z += q * inv
    return z


def _brackets(inst: BatchInstance, opts: ReferenceOptions) -> list[tuple[float, float, int]]:
    anchors = _anchor_rates(inst)
    lo, hi = min(anchors) / opts.span, max(anchors) * opts.span
    grid = np.geomspace(lo, hi, opts.grid)
    z = _grid_excess(inst, grid)
    eps = opts.tol * float(inst.scale()[0]) * 1e-3
    sgn = np.where(z > eps, 1, np.where(z < -eps, -1, 0))
    out = []
    last, last_i = 0, -1
    for i in np.nonzero(sgn)[0]:
        s = int(sgn[i])
        if last != 0 and s != last:
            out.append((float(grid[last_i]), float(grid[i]), last))
        last, last_i = s, i
    return out


def _solution(inst: BatchInstance, rho: float, brackets, method: str, tol: float) -> BatchSolution:
    p = _prices(rho)
    resps = responses(inst, p)
    fills, res = clear_fills(resps, inst.scale())
    trades = np.array([r.at(fills[k]) for k, r in enumerate(resps)])
    info = {"rate": rho, "brackets": brackets, "method": method, "residual": res, "tol": tol}
    return BatchSolution(normalize_prices(p), trades, res, 0, solver="reference", info=info)


def solve_two_asset(inst: BatchInstance, opts: ReferenceOptions | None = None) -> BatchSolution:
    """Clearing rate of a two-asset batch. Bisection when every participant
    is WGS, otherwise a log-spaced grid scan whose sign changes are refined
    by bisection; the lowest-rate crossing is returned, all in info."""
    _require_two(inst)
    opts = opts or ReferenceOptions(tol=inst.tol)
    eps = opts.tol * float(inst.scale()[0]) * 1e-3
    anchors = _anchor_rates(inst)
    if _monotone(inst):
        lo, hi = min(anchors) / opts.span, max(anchors) * opts.span
        s_lo = _sign(excess_interval(inst, lo), eps)
        s_hi = _sign(excess_interval(inst, hi), eps)
        if s_lo == 0 and s_hi < 0:
            # nobody wants A below lo: walk down to the lowest rate that still clears
            rho = _refine(inst, lo / opts.span, hi, 1, opts.xtol, eps) if _sign(excess_interval(inst, lo / opts.span), eps) > 0 else None
        elif s_lo > 0 and s_hi < 0:
            rho = _refine(inst, lo, hi, 1, opts.xtol, eps)
        else:
            rho = None
        if rho is None:
            raise NoEquilibriumFound(
                "excess demand for A does not change sign",
                diagnostic={"rates": [lo, hi], "excess": [excess_interval(inst, lo), excess_interval(inst, hi)]},
            )
        return _solution(inst, rho, [(rho, rho)], "bisection", opts.tol)
    brackets = _brackets(inst, opts)
    if not brackets:
        raise NoEquilibriumFound("no sign change of excess demand on the rate grid", diagnostic={"grid": opts.grid})
    roots = [_refine(inst, a, b, s, opts.xtol, eps) for a, b, s in brackets]
    return _solution(inst, roots[0], [(a, b) for a, b, _ in brackets], "grid", opts.tol)


@dataclass
class LegacyReport:
    """Trades consistent with conservation and a uniform rate when the CFMM
    must stay exactly on its level curve."""

    nonzero: list[dict] = field(default_factory=list)
    zero_feasible: bool = False

    @property
    def only_zero(self) -> bool:
        return not self.nonzero


def _exact(x) -> Fraction:
    return x if isinstance(x, Fraction) else to_fraction(x)


def legacy_exact_constant_check(inst: BatchInstance, grid: int = 100_000) -> LegacyReport:
    """Scan rates for trades where the single CFMM keeps f exactly constant.

    Limit rates are checked in exact arithmetic (offers may fill partially
    there); between limits every offer is all-or-nothing and the CFMM's
    curve trade is matched against the offers' net flow by root finding.
    """
    _require_two(inst)
    cfmms = inst.cfmms()
    if len(cfmms) != 1:
        raise WrongArity("legacy check expects exactly one CFMM")
    ci, cfmm = cfmms[0]
    offers = [p for p in inst.participants if isinstance(p, (LimitSellOffer, LimitBuyOffer))]
    x0 = np.asarray(cfmm.reserves, dtype=float)
    if cfmm.assets[0] == 1:
        x0 = x0[::-1]
    fn = cfmm.function
    exact_cp = isinstance(fn, ConstantProduct) or (isinstance(fn, Monomial) and len(set(fn.exponents)) == 1)

    def curve_sale(rho):
        """Nonzero amount of A the CFMM sells along the budget line at rho
        while staying on its level curve (negative: buys); None if none."""
        if exact_cp:
            s = a0_exact - b0_exact / rho
            return s if s != 0 else None
        f0 = fn.value(x0)

        def g(s):
            return fn.value(np.array([x0[0] - s, x0[1] + s * float(rho)])) - f0

        for lo, hi in ((1e-15 * x0[0], x0[0]), (-x0[1] / float(rho), -1e-15 * x0[1] / float(rho))):
            try:
                if g(lo) * g(hi) < 0:
                    return optimize.brentq(g, lo, hi, xtol=1e-15)
            except ValueError:
                continue
        return None

    # exact limits and sizes, converted once
    terms = []
    for o in offers:
        limit = _exact(o.min_price if isinstance(o, LimitSellOffer) else o.limit_price)
        if isinstance(o, LimitSellOffer):
            terms.append((o.sell, limit, _exact(o.amount), None))
        else:
            terms.append((o.sell, limit, _exact(o.endowment_amount), _exact(o.amount)))
    a0_exact, b0_exact = _exact(x0[0]), _exact(x0[1])

    def offer_range(rho):
        """Interval of the offers' net A flow (bought minus sold) at rho."""
        lo = hi = Fraction(0)
        for sell, limit, cap, want in terms:
            own = rho if sell == 0 else 1 / rho
            full = cap if want is None else min(cap, want / own)
            amount_a = (lambda q: -q) if sell == 0 else (lambda q: q / rho)
            if own > limit:
                lo += amount_a(full)
                hi += amount_a(full)
            elif own == limit:
                a, b = amount_a(Fraction(0)), amount_a(full)
                lo += min(a, b)
                hi += max(a, b)
        return lo, hi

    report = LegacyReport()
    limits = sorted({t[1] if t[0] == 0 else 1 / t[1] for t in terms})
    for rho in limits:
        lo, hi = offer_range(rho)
        if lo <= 0 <= hi:
            report.zero_feasible = True
        s = curve_sale(rho)
        if s is not None and lo <= s <= hi:
            report.nonzero.append({"rate": float(rho), "cfmm_sells_a": float(s), "exact_rate": str(rho)})
    # open intervals between limits: offers are single-valued there
    anchors = [float(r) for r in limits] or [float(x0[1] / x0[0])]
    rates = np.geomspace(min(anchors) / 1e3, max(anchors) * 1e3, grid)
    cuts = [0.0] + [float(r) for r in limits] + [math.inf]
    for a, b in zip(cuts[:-1], cuts[1:]):
        seg = rates[(rates > a) & (rates < b)]
        if seg.size < 2:
            continue
        # grid rates are plain binary64 values; Fraction(r) is their exact value.
        # Offers are single-valued and continuous inside the segment, so the
        # zero trade clears there iff their net flow hits or crosses zero.
        pts = seg[:: max(1, seg.size // 2000)]
        flows = [offer_range(Fraction(r))[0] for r in pts]
        if any(f == 0 for f in flows) or any((f < 0) != (g < 0) for f, g in zip(flows, flows[1:])):
            report.zero_feasible = True

        def gap(r):
            s = curve_sale(Fraction(r) if exact_cp else r)
            flow = float(offer_range(Fraction(r))[0])
            return (float(s) if s is not None else 0.0) - flow

        vals = np.array([gap(r) for r in pts])
        for k in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
            r = optimize.brentq(gap, pts[k], pts[k + 1], xtol=1e-14)
            s = curve_sale(Fraction(r) if exact_cp else r)
            if s is not None and abs(float(s)) > 1e-12:
                report.nonzero.append({"rate": float(r), "cfmm_sells_a": float(s)})
    return report
