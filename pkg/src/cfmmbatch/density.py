"""Two-asset CFMMs viewed as collections of limit orders.

A half sells asset A for asset B. D(z) is the cumulative amount of A it
sells at rate z (B per A); Q(x) = sup{z : D(z) <= x} is its inverse.
Alongside D we keep the two integrals the convex program needs:

    phi(z)  = int_0^z D(w)/w dw
    negg(x) = int_0^x ln Q(t) dt          (g = -negg)

Jumps are first-class: D is evaluated left-continuously (an order at its
exact limit is not counted as sold), and ``sold_range`` reports the whole
interval at a jump.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .errors import (
    DegenerateSpec,
    InconsistentDensities,
    OutOfRange,
    SingularSpot,
    UnboundedDensity,
    UnsupportedParticipant,
    WrongArity,
)
from .functions import (
    ConstantSum,
    Custom,
    DemandResponse,
    FeeWrapped,
    HSpec,
    Lmsr,
    Monomial,
    TradingFunction,
    _prices,
    same_rate,
)
from .market import BatchInstance, CfmmDecl, LimitBuyOffer, LimitSellOffer

log = logging.getLogger(__name__)

JUMP, HYPER, GENERIC = 0, 1, 2
_OVER = 1e-12  # relative slack when checking x <= D(inf)


class HalfDensity:
    """One direction of a two-asset CFMM. ``sell``/``buy`` are local (0/1)
    until bound to instance assets."""

    kind = "abstract"
    total: float = 0.0
    spot: float = math.inf
    monotone = True

    def sold(self, z):
        raise NotImplementedError

    def sold_right(self, z):
        return self.sold(z)

    def sold_range(self, z: float) -> tuple[float, float]:
        return float(self.sold(z)), float(self.sold_right(z))

    @property
    def jumps(self) -> list[tuple[float, float]]:
        return []

    @property
    def empty(self) -> bool:
        return not self.total > 0

    def _check_x(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0) or np.any(x > self.total * (1 + _OVER) + 1e-300):
            raise OutOfRange(f"x must lie in [0, {self.total}]")
        return x

    def inverse(self, x):
        raise NotImplementedError

    def lnq(self, x):
        """ln Q(x), the slope of negg; +inf at x = D(inf)."""
        with np.errstate(divide="ignore"):
            return np.log(self.inverse(x))

    def phi(self, z):
        raise NotImplementedError

    def negg(self, x):
        raise NotImplementedError

    def derivative(self, z, rel: float = 1e-6):
        z = np.asarray(z, dtype=float)
        h = rel * z
        return (self.sold(z + h) - self.sold(z - h)) / (2 * h)

    def scaled(self, factor: float) -> HalfDensity:
        """The half D'(z) = D(z * factor) (fee wrapping uses factor 1 - eps)."""
        return _ScaledHalf(self, factor)

    def kernel_params(self):
        return None

    def to_json(self) -> dict:
        raise NotImplementedError


class JumpHalf(HalfDensity):
    """All of ``size`` sold at any rate strictly above ``rate``."""

    kind = "jump"

    def __init__(self, size: float, rate: float):
        if size < 0 or not rate > 0:
            raise ValueError("jump needs size >= 0 and rate > 0")
        self.size = float(size)
        self.rate = float(rate)
        self.total = self.size
        self.spot = self.rate

    @property
    def jumps(self):
        return [(self.rate, self.size)] if self.size > 0 else []

    def sold(self, z):
        return np.where(np.asarray(z) > self.rate, self.size, 0.0)

    def sold_right(self, z):
        return np.where(np.asarray(z) >= self.rate, self.size, 0.0)

    def sold_range(self, z):
        if same_rate(z, self.rate):
            return 0.0, self.size
        return super().sold_range(z)

    def inverse(self, x):
        x = self._check_x(x)
        return np.where(x < self.size, self.rate, np.inf)

    def phi(self, z):
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore"):
            return self.size * np.maximum(0.0, np.log(z / self.rate))

    def negg(self, x):
        x = self._check_x(x)
        return x * math.log(self.rate)

    def derivative(self, z, rel=1e-6):
        return np.zeros_like(np.asarray(z, dtype=float))

    def scaled(self, factor):
        return JumpHalf(self.size, self.rate / factor)

    def kernel_params(self):
        return JUMP, self.size, self.rate

    def to_json(self):
        return {"type": "jump", "size": self.size, "rate": self.rate}


class HyperbolicHalf(HalfDensity):
    """D(z) = max(0, alpha - beta/z): constant and weighted products."""

    kind = "hyperbolic"

    def __init__(self, alpha: float, beta: float):
        if alpha < 0 or not beta > 0:
            raise ValueError("hyperbolic half needs alpha >= 0, beta > 0")
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.total = self.alpha
        self.spot = self.beta / self.alpha if self.alpha > 0 else math.inf

    def sold(self, z):
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.alpha * z > self.beta, self.alpha - self.beta / z, 0.0)

    def inverse(self, x):
        x = self._check_x(x)
        with np.errstate(divide="ignore"):
            return np.where(x < self.alpha, self.beta / np.maximum(self.alpha - x, 0.0), np.inf)

    def phi(self, z):
        z = np.asarray(z, dtype=float)
        s = self.spot
        with np.errstate(divide="ignore", invalid="ignore"):
            val = self.alpha * np.log(z / s) - self.alpha + self.beta / z
        return np.where(z > s, val, 0.0)

    def negg(self, x):
        x = self._check_x(x)
        a, b = self.alpha, self.beta
        r = np.maximum(a - x, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            rlogr = np.where(r > 0, r * np.log(r), 0.0)
        return x * math.log(b) - a * math.log(a) + rlogr + x

    def derivative(self, z, rel=1e-6):
        z = np.asarray(z, dtype=float)
        return np.where(z > self.spot, self.beta / z**2, 0.0)

    def scaled(self, factor):
        return HyperbolicHalf(self.alpha, self.beta / factor)

    def kernel_params(self):
        return HYPER, self.alpha, self.beta

    def to_json(self):
        return {"type": "hyperbolic", "alpha": self.alpha, "beta": self.beta}


class EmptyHalf(HalfDensity):
    kind = "empty"

    def sold(self, z):
        return np.zeros_like(np.asarray(z, dtype=float))

    def inverse(self, x):
        x = self._check_x(x)
        return np.full_like(x, np.inf)

    def phi(self, z):
        return np.zeros_like(np.asarray(z, dtype=float))

    def negg(self, x):
        return np.zeros_like(self._check_x(x))

    def scaled(self, factor):
        return self

    def kernel_params(self):
        return JUMP, 0.0, 1.0

    def to_json(self):
        return {"type": "jump", "size": 0.0, "rate": 1.0}


class FunctionHalf(HalfDensity):
    """Numeric half around a vectorized D. If D rises and then falls (not
    WGS), the monotone envelope D(min(z, peak)) is used and ``monotone``
    is False."""

    kind = "function"

    def __init__(self, raw: Callable, spot: float, total: float, label: str = "function"):
        self.raw = raw
        self.spot = float(spot)
        self.label = label
        self.peak = math.inf
        zs = self.spot * np.logspace(0, 8, 400)
        vals = np.asarray(raw(zs), dtype=float)
        m = int(np.argmax(vals))
        if vals[m] > vals[-1] + 1e-9 * max(vals[m], 1e-300) and m < zs.size - 1:
            lo, hi = math.log(zs[max(m - 1, 0)]), math.log(zs[m + 1])
            res = optimize.minimize_scalar(lambda v: -float(raw(math.exp(v))), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
            self.peak = math.exp(res.x)
            self.monotone = False
            self.total = float(raw(self.peak))
        else:
            self.total = float(total)

    def sold(self, z):
        z = np.asarray(z, dtype=float)
        out = np.asarray(self.raw(np.minimum(z, self.peak)), dtype=float)
        return np.where(z > self.spot, np.clip(out, 0.0, self.total), 0.0)

    def inverse(self, x):
        x = self._check_x(x)
        return np.vectorize(self._inverse1, otypes=[float])(x)

    def _inverse1(self, x: float) -> float:
        if x <= 0:
            return self.spot
        if x >= self.total * (1 - 1e-15):
            return math.inf
        lo = math.log(self.spot)
        hi = lo + 1.0
        while float(self.sold(math.exp(hi))) <= x:
            hi += 2 * (hi - lo)
            if hi > 700:
                return math.inf
        f = lambda v: float(self.sold(math.exp(v))) - x  # noqa: E731
        v = optimize.brentq(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=400)
        return math.exp(v)

    def _int_log(self, fn, a: float, b: float) -> float:
        if not b > a:
            return 0.0
        val, _ = integrate.quad(fn, a, b, epsabs=1e-12, epsrel=1e-10, limit=200)
        return val

    def phi(self, z):
        def one(zz):
            if not zz > self.spot:
                return 0.0
            top = min(zz, self.peak)
            val = self._int_log(lambda v: float(self.sold(math.exp(v))), math.log(self.spot), math.log(top))
            if zz > top:
                val += self.total * math.log(zz / top)
            return val

        return np.vectorize(one, otypes=[float])(np.asarray(z, dtype=float))

    def negg(self, x):
        # negg(x) = x ln s + int_s^Q(x) (x - D(w))/w dw
        def one(xx):
            if xx <= 0:
                return 0.0
            q = self._inverse1(xx)
            ls = math.log(self.spot)
            lq = math.log(min(q, self.peak))
            val = xx * ls + self._int_log(lambda v: xx - float(self.sold(math.exp(v))), ls, lq)
            if math.isinf(q) and math.isinf(self.peak):
                tail, _ = integrate.quad(lambda v: xx - float(self.sold(math.exp(v))), lq, math.inf, limit=200)
                val += tail
            return val

        return np.vectorize(one, otypes=[float])(self._check_x(x))

    def scaled(self, factor):
        raw = self.raw
        return FunctionHalf(lambda z: raw(np.asarray(z) * factor), self.spot / factor, self.total, self.label)

    def to_json(self):
        return table_half(self).to_json()


class TabulatedHalf(HalfDensity):
    """D through (rates, amounts), linear in 1/z between knots.

    Interpolating in 1/z is exact for product-type halves. The last rate may
    be inf, which pins D(inf); otherwise D stays flat past the last knot.
    """

    kind = "table"

    def __init__(self, rates, amounts):
        r = np.asarray(rates, dtype=float)
        d = np.asarray(amounts, dtype=float)
        if r.ndim != 1 or r.shape != d.shape or r.size < 2 or np.any(np.diff(r) <= 0) or r[0] <= 0:
            raise ValueError("table needs >= 2 increasing positive rates and matching amounts")
        if np.any(np.diff(d) < -1e-12 * max(d.max(), 1e-300)):
            self.monotone = False
        d = np.maximum.accumulate(np.maximum(d, 0.0))
        self.rates, self.amounts = r, d
        self.u = 1.0 / r
        self.total = float(d[-1])
        first = np.nonzero(d > 0)[0]
        self.spot = float(r[max(first[0] - 1, 0)]) if first.size else math.inf
        self._m = np.diff(d) / (self.u[:-1] - self.u[1:])
        # phi at each knot; the piece from r_k to z is
        # (D_k + m u_k) ln(z / r_k) - m (u_k - 1/z)
        with np.errstate(divide="ignore", invalid="ignore"):
            piece = (d[:-1] + self._m * self.u[:-1]) * np.log(r[1:] / r[:-1]) - self._m * (self.u[:-1] - self.u[1:])
        self._phi_knots = np.concatenate(([0.0], np.cumsum(piece)))

    def _segment(self, z):
        return np.clip(np.searchsorted(self.rates, z, side="right") - 1, 0, self.rates.size - 2)

    def sold(self, z):
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore"):
            uz = 1.0 / z
        k = self._segment(z)
        val = self.amounts[k] + self._m[k] * (self.u[k] - uz)
        val = np.where(z >= self.rates[-1], self.total, val)
        return np.where(z > self.rates[0], np.clip(val, 0.0, self.total), 0.0)

    def inverse(self, x):
        x = self._check_x(x)
        k = np.clip(np.searchsorted(self.amounts, x, side="right") - 1, 0, self.rates.size - 2)
        m = self._m[k]
        with np.errstate(divide="ignore", invalid="ignore"):
            uz = self.u[k] - (x - self.amounts[k]) / m
            z = np.where(m > 0, 1.0 / uz, self.rates[k + 1])
        z = np.where(np.isfinite(z) & (z > 0), z, np.inf)
        return np.where(x >= self.total, np.inf, z)

    def phi(self, z):
        z = np.asarray(z, dtype=float)
        r = self.rates
        k = self._segment(z)
        zc = np.minimum(z, r[k + 1])
        m, uk = self._m[k], self.u[k]
        with np.errstate(divide="ignore", invalid="ignore"):
            part = (self.amounts[k] + m * uk) * np.log(zc / r[k]) - m * (uk - 1.0 / zc)
            tail = np.where(z > r[-1], self.total * np.log(z / r[-1]), 0.0)
        return np.where(z > r[0], self._phi_knots[k] + part + tail, 0.0)

    def negg(self, x):
        # x ln r_k - phi(r_k) + int_{r_k}^{Q} (x - D(w))/w dw on Q's segment
        x = self._check_x(x)
        r = self.rates
        q = self.inverse(x)
        k = np.where(np.isinf(q), r.size - 2, np.clip(np.searchsorted(r, q, side="left") - 1, 0, r.size - 2))
        m, uk, dk = self._m[k], self.u[k], self.amounts[k]
        qc = np.minimum(q, r[k + 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            lead = x * np.log(r[k]) - self._phi_knots[k]
            c = x - dk - m * uk
            mid = np.where(np.abs(c) > 0, c * np.log(qc / r[k]), 0.0) + m * (uk - 1.0 / qc)
        return np.where(x > 0, lead + mid, 0.0)

    def scaled(self, factor):
        return TabulatedHalf(self.rates / factor, self.amounts)

    def to_json(self):
        rates = [float(v) if np.isfinite(v) else "inf" for v in self.rates]
        return {"type": "table", "rates": rates, "amounts": self.amounts.tolist()}


class _ScaledHalf(FunctionHalf):
    def __init__(self, base: HalfDensity, factor: float):
        super().__init__(lambda z: base.sold(np.asarray(z) * factor), base.spot / factor, base.total, base.kind)


def table_half(h: HalfDensity, points: int = 512) -> TabulatedHalf:
    """Tabulate a half on a log grid from its spot to where it reaches
    0.999 of D(inf), closing with one far knot at D(inf)."""
    if h.empty:
        return TabulatedHalf([1.0, 2.0], [0.0, 0.0])
    target = 0.999 * h.total
    hi = h.spot * 2.0
    while float(h.sold(hi)) < target:
        hi *= 2.0
        if hi > h.spot * 1e15:
            raise UnboundedDensity("density does not approach its limit")
    rates = h.spot * np.logspace(0.0, math.log10(hi / h.spot), points)
    amounts = np.asarray(h.sold(rates), dtype=float)
    amounts[0] = 0.0
    rates = np.append(rates, np.inf)
    amounts = np.append(amounts, h.total)
    return TabulatedHalf(rates, amounts)


def _half_json(obj: dict) -> HalfDensity:
    t = obj.get("type")
    if t == "jump":
        return JumpHalf(obj["size"], obj["rate"]) if obj["size"] > 0 else EmptyHalf()
    if t == "hyperbolic":
        return HyperbolicHalf(obj["alpha"], obj["beta"]) if obj["alpha"] > 0 else EmptyHalf()
    if t == "table":
        return TabulatedHalf([float(v) for v in obj["rates"]], obj["amounts"])
    raise ValueError(f"unknown half type {t!r}")


def half_from_json(obj: dict) -> HalfDensity:
    return _half_json(obj)


def _hyper(alpha, beta):
    return HyperbolicHalf(alpha, beta) if alpha > 0 else EmptyHalf()


def _demand_half(fn: TradingFunction, reserves, side: int, spot: float) -> TabulatedHalf:
    """Tabulate the half that sells asset ``side`` from repeated demand queries."""
    x0 = np.asarray(reserves, dtype=float)

    def raw(z):
        z = np.asarray(z, dtype=float)
        out = np.empty_like(z)
        for i, zz in np.ndenumerate(z):
            p = np.array([zz, 1.0]) if side == 0 else np.array([1.0, zz])
            out[i] = x0[side] - fn.demand(x0, p).new_reserves[side]
        return np.maximum(out, 0.0)

    # D(z) ~ D(inf) - c/z far out: one Richardson step, capped at the reserve
    far = spot * 1e9
    total = min(float(2 * raw(2 * far) - raw(far)), float(x0[side]))
    if not np.isfinite(total):
        raise UnboundedDensity("D(inf) is not finite")
    if total <= 0:
        return EmptyHalf()
    return table_half(FunctionHalf(raw, spot, min(total, x0[side]), fn.kind))


def density_from_function(fn: TradingFunction, reserves) -> tuple[HalfDensity, HalfDensity]:
    """(half selling asset 0, half selling asset 1) for a two-asset CFMM."""
    x0 = np.asarray(reserves, dtype=float)
    if x0.size != 2 or (fn.n_assets not in (None, 2)):
        raise WrongArity("densities exist for two-asset CFMMs only")
    if not np.all(np.isfinite(x0)):
        raise UnboundedDensity("reserves must be finite")
    a0, b0 = x0
    if isinstance(fn, FeeWrapped):
        h1, h2 = density_from_function(fn.base, x0)
        keep = 1.0 - fn.eps
        return h1.scaled(keep), h2.scaled(keep)
    if isinstance(fn, DensityPair):
        return fn.halves
    if isinstance(fn, Monomial):
        da, db = fn.exponents / fn.exponents.sum()
        if a0 == 0 and b0 == 0:
            return EmptyHalf(), EmptyHalf()
        # only one positive reserve: the empty side has no spot, the other sells from rate 0+
        return _hyper(a0 * db, b0 * da if b0 > 0 else 1e-300), _hyper(b0 * da, a0 * db if a0 > 0 else 1e-300)
    if isinstance(fn, ConstantSum):
        h1 = JumpHalf(a0, fn.rate) if a0 > 0 else EmptyHalf()
        h2 = JumpHalf(b0, 1.0 / fn.rate) if b0 > 0 else EmptyHalf()
        return h1, h2
    if isinstance(fn, HSpec):
        c = fn.coefficients
        if c.size == 1:
            if c[0] <= 1.0:
                raise DegenerateSpec("h == 1 sells all of A at every rate")
            return _hyper(a0 / c[0], b0 * (1 - 1 / c[0])), _hyper(b0 * (1 - 1 / c[0]), a0 / c[0])
        return _hspec_halves(fn, a0, b0)
    if isinstance(fn, Lmsr):
        return _lmsr_half(a0, b0), _lmsr_half(b0, a0)
    if isinstance(fn, Custom) or fn.n_assets == 2:
        try:
            g = fn.gradient(x0)
            s = float(g[0] / g[1])
        except SingularSpot as exc:
            raise UnboundedDensity(str(exc)) from exc
        return _demand_half(fn, x0, 0, s), _demand_half(fn, x0, 1, 1.0 / s)
    raise WrongArity(f"no density for {fn.kind}")


def _lmsr_half(a0: float, b0: float) -> HalfDensity:
    if a0 <= 0:
        return EmptyHalf()

    def raw(z):
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore"):
            return np.clip((a0 - b0 + np.log(z)) / (1.0 + z), 0.0, a0)

    return FunctionHalf(raw, math.exp(b0 - a0), a0, "lmsr")


def _hspec_halves(fn: HSpec, a0: float, b0: float):
    if a0 <= 0 or b0 <= 0:
        raise UnboundedDensity("hspec densities need both reserves positive")
    g = fn.gradient(np.array([a0, b0]))
    spot = float(g[0] / g[1])

    def raw_a(z):
        z = np.asarray(z, dtype=float)
        h = np.maximum(fn.h(1.0 / z), 1.0)
        return np.clip(a0 - (1 - 1 / h) * (a0 + b0 / z), 0.0, a0)

    def raw_b(s):
        s = np.asarray(s, dtype=float)
        h = np.maximum(fn.h(s), 1.0)
        return np.clip(b0 - (a0 + s * b0) / (h * s), 0.0, b0)

    return (
        FunctionHalf(raw_a, spot, a0 / fn.coefficients[0], "hspec"),
        FunctionHalf(raw_b, 1.0 / spot, b0, "hspec"),
    )


def inverse_density(h: HalfDensity, x) -> float:
    """sup{p : D(p) <= x}."""
    return float(h.inverse(x))


def g_value(h: HalfDensity, x) -> float:
    """g(x) = int_0^{Q(x)} d(p) ln(1/p) dp, jump terms included."""
    return float(-h.negg(x))


def g_derivative(h: HalfDensity, x) -> float:
    """g'(x) = ln(1 / Q(x))."""
    return float(-h.lnq(x))


class DensityPair(TradingFunction):
    """A two-asset CFMM given directly by its two halves."""

    kind = "density_pair"
    n_assets = 2

    def __init__(self, sell_a: HalfDensity, sell_b: HalfDensity):
        self.halves = (sell_a, sell_b)
        self.wgs = sell_a.monotone and sell_b.monotone

    def value(self, x):
        raise NotImplementedError("a density pair carries no explicit trading function")

    def gradient(self, x):
        raise SingularSpot("a density pair has no explicit spot valuation")

    def demand(self, reserves, prices) -> DemandResponse:
        x0 = np.asarray(reserves, dtype=float)
        p = _prices(prices, 2)
        rho = p[0] / p[1]
        h1, h2 = self.halves
        lo1, hi1 = h1.sold_range(rho)
        lo2, hi2 = h2.sold_range(1.0 / rho)
        # asset-0 amount sold; selling B shows up as a negative amount of A
        rng = (lo1 - hi2 / rho, hi1 - lo2 / rho)
        s = lo1 if hi1 > 0 else (-lo2 / rho if hi2 > 0 else 0.0)
        if hi1 > 0 and hi2 > 0:
            s = 0.0 if rng[0] <= 0 <= rng[1] else s
        delta = np.array([-s, s * rho])
        return DemandResponse(x0 + delta, delta, None, rng)

    def to_json(self):
        return {"kind": "density_pair", "halves": [h.to_json() for h in self.halves]}


def density_cfmm(pair) -> DensityPair:
    """Wrap two halves as a CFMM; rejects pairs that would arbitrage themselves."""
    h1, h2 = pair
    s1 = h1.spot if not h1.empty else math.inf
    s2 = h2.spot if not h2.empty else math.inf
    if s1 * s2 < 1.0 * (1 - 1e-12):
        raise InconsistentDensities(f"halves cross: sells A from {s1}, buys A up to {1 / s2}")
    return DensityPair(h1, h2)


def write_density_csv(h: HalfDensity, fh, rates=None, points: int = 200):
    """Write rate, D(rate), d(rate) rows for plotting."""
    if rates is None:
        lo = h.spot if math.isfinite(h.spot) else 1.0
        rates = lo * np.logspace(-0.5, 2.0, points)
    rates = np.asarray(rates, dtype=float)
    w = csv.writer(fh)
    w.writerow(["rate", "D", "d"])
    for z, d, dd in zip(rates, h.sold(rates), h.derivative(rates)):
        w.writerow([f"{z:.12g}", f"{d:.12g}", f"{dd:.12g}"])


@dataclass(eq=False)
class BoundHalf:
    """A half attached to an instance: participant index and global assets."""

    participant: int
    sell: int
    buy: int
    density: HalfDensity
    side: int = 0


def instance_halves(inst: BatchInstance, allow_buy: bool = False) -> tuple[list[BoundHalf], list[int]]:
    """Split every participant into halves. Returns (halves, skipped
    participant indices). Buy offers and 3+-asset CFMMs have no half form."""
    halves: list[BoundHalf] = []
    skipped: list[int] = []
    for i, p in enumerate(inst.participants):
        if isinstance(p, LimitSellOffer):
            if p.amount > 0:
                halves.append(BoundHalf(i, p.sell, p.buy, JumpHalf(p.amount, p.min_price)))
            else:
                log.info("participant %d: empty sell offer dropped", i)
        elif isinstance(p, LimitBuyOffer):
            if not allow_buy:
                raise UnsupportedParticipant(f"participant {i}: limit buy offers are not WGS")
            skipped.append(i)
        elif isinstance(p, CfmmDecl):
            if len(p.assets) != 2:
                raise UnsupportedParticipant(f"participant {i}: CFMM {p.id} is not two-asset")
            h1, h2 = density_from_function(p.effective_function(), p.reserves)
            for side, h in enumerate((h1, h2)):
                if h.empty:
                    log.info("participant %d: empty half of %s dropped", i, p.id)
                    continue
                sell, buy = (p.assets[0], p.assets[1]) if side == 0 else (p.assets[1], p.assets[0])
                halves.append(BoundHalf(i, sell, buy, h, side))
        else:
            raise UnsupportedParticipant(f"participant {i}: {type(p).__name__}")
    return halves, skipped
