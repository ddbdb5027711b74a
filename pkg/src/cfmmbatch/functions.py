"""Trading-function families, spot valuations, demand responses, the
budget-fraction (h) language and the fee wrapper.

A CFMM facing batch valuations p maximizes f over its budget set
{x >= 0 : p.x <= p.x0}. Built-in families use closed forms; custom
functions fall back to a line search (two assets) or a projected-gradient
search on the budget simplex.
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import (
    DegenerateSpec,
    InvalidFee,
    InvalidPrices,
    NonConcaveFunction,
    SingularSpot,
    WrongArity,
)
from .market import LimitBuyOffer, LimitSellOffer

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
RATE_RTOL = 1e-12


def same_rate(a: float, b: float, rtol: float = RATE_RTOL) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b))


def _prices(prices, n: int) -> np.ndarray:
    p = np.asarray(prices, dtype=float)
    if p.shape != (n,):
        raise WrongArity(f"expected {n} prices, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise InvalidPrices(f"prices must be finite and > 0, got {p}")
    return p


@dataclass(eq=False)
class DemandResponse:
    """Result of one demand query.

    ``sold_range`` is set for two-asset responses: the interval of asset-0
    amounts the CFMM is indifferent over (a single point unless demand is
    set-valued at this rate). ``post_fee_reserves`` and ``fee`` are only
    filled by the fee wrapper; ``new_reserves`` is then the pre-fee image.
    """

    new_reserves: np.ndarray
    delta: np.ndarray
    spot_after: np.ndarray | None = None
    sold_range: tuple[float, float] | None = None
    post_fee_reserves: np.ndarray | None = None
    fee: np.ndarray | None = None


def _response(fn, x0, x, sold_range=None) -> DemandResponse:
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    try:
        spot = fn.gradient(x)
    except SingularSpot:
        spot = None
    if sold_range is None and x.size == 2:
        s = float(x0[0] - x[0])
        sold_range = (s, s)
    return DemandResponse(x, x - x0, spot, sold_range)


class TradingFunction:
    """Base class. Subclasses set ``kind`` and ``n_assets`` (None: any >= 2)."""

    kind = "abstract"
    n_assets: int | None = None
    budget_invariant = False
    wgs = True

    def _check_arity(self, x):
        x = np.asarray(x, dtype=float)
        if self.n_assets is not None and x.size != self.n_assets:
            raise WrongArity(f"{self.kind} takes {self.n_assets} assets, got {x.size}")
        return x

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        return numeric_gradient(self.value, self._check_arity(x))

    def demand(self, reserves, prices) -> DemandResponse:
        x0 = self._check_arity(reserves)
        p = _prices(prices, x0.size)
        return _response(self, x0, self._optimum(x0, p))

    def _optimum(self, x0, p):
        raise NotImplementedError

    def to_json(self) -> dict:
        return {"kind": self.kind}

    def __repr__(self):
        return f"{type(self).__name__}({self.to_json()})"


def numeric_gradient(f: Callable, x) -> np.ndarray:
    """Central differences with h = max(1e-6, 1e-6|x_i|); one-sided near x_i = 0."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = max(1e-6, 1e-6 * abs(x[i]))
        up, dn = x.copy(), x.copy()
        up[i] += h
        if x[i] >= h:
            dn[i] -= h
            g[i] = (f(up) - f(dn)) / (2 * h)
        else:
            g[i] = (f(up) - f(x)) / h
    return g


class Monomial(TradingFunction):
    """f = prod x_i^d_i. Spends fraction d_i / sum(d) of the budget on asset i."""

    kind = "monomial"
    budget_invariant = True

    def __init__(self, exponents: Sequence[float]):
        d = np.asarray(exponents, dtype=float)
        if d.ndim != 1 or d.size < 2 or np.any(~(d > 0)):
            raise ValueError("monomial exponents must be >= 2 positive numbers")
        self.exponents = d
        self.n_assets = d.size

    def value(self, x):
        x = self._check_arity(x)
        return float(np.prod(x**self.exponents))

    def gradient(self, x):
        x = self._check_arity(x)
        if np.any(x <= 0):
            raise SingularSpot(f"{self.kind} spot undefined at a zero reserve")
        return self.value(x) * self.exponents / x

    def _optimum(self, x0, p):
        budget = float(p @ x0)
        return budget * (self.exponents / self.exponents.sum()) / p

    def to_json(self):
        return {"kind": "monomial", "exponents": self.exponents.tolist()}


class ConstantProduct(Monomial):
    kind = "constant_product"

    def __init__(self):
        super().__init__((1.0, 1.0))

    def to_json(self):
        return {"kind": "constant_product"}


class WeightedProduct(Monomial):
    kind = "weighted_product"

    def __init__(self, w_a: float, w_b: float):
        super().__init__((w_a, w_b))

    def to_json(self):
        return {"kind": "weighted_product", "weights": self.exponents.tolist()}


class ConstantSum(TradingFunction):
    """f = r*a + b. Sells everything above rate r, buys everything below."""

    kind = "constant_sum"
    n_assets = 2

    def __init__(self, rate: float):
        if not rate > 0:
            raise ValueError("constant_sum rate must be > 0")
        self.rate = float(rate)

    def value(self, x):
        x = self._check_arity(x)
        return float(self.rate * x[0] + x[1])

    def gradient(self, x):
        self._check_arity(x)
        return np.array([self.rate, 1.0])

    def demand(self, reserves, prices):
        x0 = self._check_arity(reserves)
        p = _prices(prices, 2)
        rho = p[0] / p[1]
        budget = float(p @ x0)
        if same_rate(rho, self.rate):
            # indifferent along the whole budget line; keep the reserves
            return _response(self, x0, x0.copy(), (-x0[1] / rho, float(x0[0])))
        x = np.array([0.0, budget / p[1]]) if rho > self.rate else np.array([budget / p[0], 0.0])
        return _response(self, x0, x)

    def to_json(self):
        return {"kind": "constant_sum", "rate": self.rate}


class Lmsr(TradingFunction):
    """f = n - sum exp(-x_i). Spot exchange rate A->B is exp(b - a)."""

    kind = "lmsr"
    wgs = False

    def __init__(self, n_assets: int = 2):
        self.n_assets = int(n_assets)

    def value(self, x):
        x = self._check_arity(x)
        return float(self.n_assets - np.exp(-x).sum())

    def gradient(self, x):
        return np.exp(-self._check_arity(x))

    def _optimum(self, x0, p):
        # x_i = c - ln p_i on the support, water-filling for the x_i >= 0 bounds
        budget = float(p @ x0)
        logp = np.log(p)
        live = np.ones(p.size, dtype=bool)
        while True:
            c = (budget + p[live] @ logp[live]) / p[live].sum()
            x = np.where(live, c - logp, 0.0)
            neg = live & (x < 0)
            if not neg.any():
                return np.maximum(x, 0.0)
            live &= ~neg

    def to_json(self):
        out = {"kind": "lmsr"}
        if self.n_assets != 2:
            out["n_assets"] = self.n_assets
        return out


class HSpec(TradingFunction):
    """Budget-fraction rule: spend K / h(p_B/p_A) on B and the rest on A.

    h is a polynomial with nonnegative coefficients and h >= 1 wherever it
    is queried. Constant h = c is the weighted product a^(1-1/c) b^(1/c).
    """

    kind = "hspec"
    n_assets = 2
    budget_invariant = True

    def __init__(self, coefficients: Sequence[float]):
        c = np.trim_zeros(np.asarray(coefficients, dtype=float), "b")
        if c.size == 0 or np.any(c < 0):
            raise DegenerateSpec("h needs nonnegative coefficients, not all zero")
        self.coefficients = c

    def h(self, u):
        return np.polynomial.polynomial.polyval(u, self.coefficients)

    def _h_checked(self, u: float) -> float:
        hu = float(self.h(u))
        if not hu >= 1.0 - 1e-15:
            raise DegenerateSpec(f"h({u:g}) = {hu:g} < 1: the B share would exceed the budget")
        return max(hu, 1.0)

    def _optimum(self, x0, p):
        hu = self._h_checked(p[1] / p[0])
        budget = float(p @ x0)
        b = budget / (hu * p[1])
        a = (budget - b * p[1]) / p[0]
        return np.array([max(a, 0.0), b])

    # f is degree-1 homogeneous: f(a, b) = b * phi(a / b), with
    # ln phi(t) = ln h(u) + int_0^{ln u} (1 - 1/h(e^v)) dv and t = u (h(u) - 1).
    def _u_of_ratio(self, t: float) -> float:
        q = lambda u: u * (self._h_checked(u) - 1.0) - t  # noqa: E731
        hi = 1.0
        while q(hi) < 0:
            hi *= 2.0
            if hi > 1e300:
                raise DegenerateSpec("h is constant 1: no finite spot")
        return optimize.brentq(q, 0.0, hi, xtol=1e-300, rtol=1e-15)

    def _log_phi(self, u: float) -> float:
        lu = math.log(u)
        val, _ = integrate.quad(lambda v: 1.0 - 1.0 / self.h(math.exp(v)), 0.0, lu, epsabs=1e-13, epsrel=1e-12)
        return math.log(self.h(u)) + val

    def value(self, x):
        a, b = self._check_arity(x)
        if self.coefficients.size == 1:
            c = self.coefficients[0]
            self._h_checked(0.0)
            return float(a ** (1 - 1 / c) * b ** (1 / c))
        if self.coefficients[0] < 1.0:
            raise DegenerateSpec("h(0) < 1")
        if b == 0:
            big = 1e12
            return float(a * math.exp(self._log_phi(self._u_of_ratio(big))) / big)
        if a == 0:
            if self.coefficients[0] > 1.0:
                return 0.0
            return float(b * math.exp(self._log_phi(1e-300)))
        t = a / b
        return float(b * math.exp(self._log_phi(self._u_of_ratio(t))))

    def gradient(self, x):
        a, b = self._check_arity(x)
        if self.coefficients.size == 1:
            c = self.coefficients[0]
            self._h_checked(0.0)
            if a <= 0 or b <= 0:
                raise SingularSpot("weighted-product spot undefined at a zero reserve")
            f = self.value(x)
            return f * np.array([(1 - 1 / c) / a, (1 / c) / b])
        if b <= 0:
            raise SingularSpot("hspec spot undefined with no B reserve")
        u = self._u_of_ratio(a / b) if a > 0 else 0.0
        if u == 0.0:
            return np.array([1.0, 0.0])
        # grad f = phi / h * (1/u, 1)
        scale = math.exp(self._log_phi(u)) / float(self.h(u))
        return scale * np.array([1.0 / u, 1.0])

    def to_json(self):
        return {"kind": "hspec", "coefficients": self.coefficients.tolist()}


def hspec_demand(h, reserves, prices) -> DemandResponse:
    """Demand of the budget-fraction rule ``h`` (coefficients or HSpec)."""
    fn = h if isinstance(h, HSpec) else HSpec(h)
    return fn.demand(reserves, prices)


class Custom(TradingFunction):
    """Black-box f with numeric gradient. ``expr`` keeps the JSON form."""

    kind = "custom"
    wgs = None

    def __init__(self, func: Callable, n_assets: int, expr: str | None = None, symbols=None):
        self.func = func
        self.n_assets = int(n_assets)
        self.expr = expr
        self.symbols = tuple(symbols) if symbols else None

    @classmethod
    def from_expression(cls, expr: str, symbols: Sequence[str]) -> Custom:
        return cls(compile_expression(expr, symbols), len(symbols), expr, symbols)

    def value(self, x):
        return float(self.func(self._check_arity(x)))

    def _optimum(self, x0, p):
        if self.n_assets == 2:
            return maximize_on_budget_line(self.value, x0, p)
        return maximize_on_simplex(self.value, self.gradient, x0, p)

    def to_json(self):
        if self.expr is None:
            raise ValueError("custom function built from a callable has no JSON form")
        out = {"kind": "custom", "expr": self.expr}
        if self.symbols:
            out["symbols"] = list(self.symbols)
        return out


def _bundle_2(w: float, budget: float, p) -> np.ndarray:
    return np.array([w * budget / p[0], (1.0 - w) * budget / p[1]])


def maximize_on_budget_line(f: Callable, x0, p, grid: int = 65, xtol: float = 1e-14) -> np.ndarray:
    """Golden-section search on the share of budget held in asset 0.

    A coarse grid certifies unimodality first; a quasi-concave f is
    unimodal along the budget line, so a second local peak is reported as
    NonConcaveFunction rather than silently picking one.
    """
    budget = float(p @ x0)
    if budget <= 0:
        return np.zeros(2)
    ws = np.linspace(0.0, 1.0, grid)
    vals = np.array([f(_bundle_2(w, budget, p)) for w in ws])
    m = int(np.argmax(vals))
    slack = 1e-10 * max(1.0, float(np.max(np.abs(vals))))
    if np.any(np.diff(vals[: m + 1]) < -slack) or np.any(np.diff(vals[m:]) > slack):
        raise NonConcaveFunction("objective is not unimodal along the budget line")
    lo, hi = ws[max(m - 1, 0)], ws[min(m + 1, grid - 1)]
    a, b = hi - _GOLDEN * (hi - lo), lo + _GOLDEN * (hi - lo)
    fa, fb = f(_bundle_2(a, budget, p)), f(_bundle_2(b, budget, p))
    while hi - lo > xtol:
        if fa < fb:
            lo, a, fa = a, b, fb
            b = lo + _GOLDEN * (hi - lo)
            fb = f(_bundle_2(b, budget, p))
        else:
            hi, b, fb = b, a, fa
            a = hi - _GOLDEN * (hi - lo)
            fa = f(_bundle_2(a, budget, p))
    best_w = 0.5 * (lo + hi)
    cands = [(f(_bundle_2(w, budget, p)), w) for w in (best_w, ws[m])]
    fbest, best_w = max(cands)
    if f(x0) >= fbest:
        return np.asarray(x0, dtype=float).copy()
    return _bundle_2(best_w, budget, p)


def project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.nonzero(u - css / np.arange(1, v.size + 1) > 0)[0][-1]
    return np.maximum(v - css[k] / (k + 1), 0.0)


def maximize_on_simplex(f, grad, x0, p, restarts: int = 3, seed: int = 0) -> np.ndarray:
    """Maximize f(w*K/p) over budget shares w on the simplex.

    Only comparisons and normalized gradient directions are used, so for a
    homogeneous f the result scales exactly with the budget.
    """
    n = p.size
    budget = float(p @ x0)
    if budget <= 0:
        return np.zeros(n)
    to_x = lambda w: w * budget / p  # noqa: E731
    rng = np.random.default_rng(seed)
    cands = [np.eye(n)[i] for i in range(n)]
    cands += [(np.eye(n)[i] + np.eye(n)[j]) / 2 for i in range(n) for j in range(i + 1, n)]
    cands += [np.full(n, 1.0 / n), p * x0 / budget]
    cands += list(rng.dirichlet(np.ones(n), size=8 * n))
    scored = sorted(((f(to_x(w)), i, w) for i, w in enumerate(cands)), key=lambda t: (-t[0], t[1]))
    best_val, _, best_w = scored[0]
    for val, _, w in scored[:restarts]:
        step = 0.1
        while step > 1e-13:
            g = grad(to_x(w)) / p
            g = g - g.mean()
            norm = np.linalg.norm(g)
            if norm == 0:
                break
            trial = project_simplex(w + step * g / norm)
            tv = f(to_x(trial))
            if tv > val:
                w, val = trial, tv
                step *= 1.5
            else:
                step *= 0.5
        if val > best_val:
            best_val, best_w = val, w
    if f(x0) >= best_val:
        return np.asarray(x0, dtype=float).copy()
    return to_x(best_w)


def spot_valuations(fn: TradingFunction, reserves) -> np.ndarray:
    """Gradient of f at the reserves; its entry ratios are spot exchange rates."""
    return fn.gradient(np.asarray(reserves, dtype=float))


def demand_response(fn: TradingFunction, reserves, prices) -> DemandResponse:
    return fn.demand(reserves, prices)


def fee_image(x, reserves_hat, eps: float) -> np.ndarray:
    """chi: inflows above the pre-batch reserves are charged fraction eps."""
    x = np.asarray(x, dtype=float)
    xh = np.asarray(reserves_hat, dtype=float)
    return np.where(x <= xh, x, xh + (1.0 - eps) * (x - xh))


class FeeWrapped(TradingFunction):
    """x -> f(chi(x)) for fixed pre-batch reserves and fee eps."""

    kind = "fee_wrapped"

    def __init__(self, base: TradingFunction, reserves_hat, eps: float):
        if not 0.0 <= eps < 1.0:
            raise InvalidFee(f"fee must lie in [0, 1), got {eps}")
        self.base = base
        self.reserves_hat = np.asarray(reserves_hat, dtype=float).copy()
        self.eps = float(eps)
        self.n_assets = base.n_assets
        self.budget_invariant = False
        self.wgs = base.wgs

    def value(self, x):
        return self.base.value(fee_image(x, self.reserves_hat, self.eps))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        g = self.base.gradient(fee_image(x, self.reserves_hat, self.eps))
        return np.where(x > self.reserves_hat, (1.0 - self.eps) * g, g)

    def demand(self, reserves, prices):
        x0 = np.asarray(reserves, dtype=float)
        if self.eps == 0.0:
            r = self.base.demand(x0, prices)
            return DemandResponse(r.new_reserves, r.delta, r.spot_after, r.sold_range, r.new_reserves, np.zeros_like(x0))
        p = _prices(prices, x0.size)
        xh = self.reserves_hat
        keep = 1.0 - self.eps
        # the chi-image is the base demand with bought assets priced up by 1/(1-eps)
        bought = self.base.demand(xh, p).new_reserves > xh
        for _ in range(2 * x0.size + 2):
            q = np.where(bought, p / keep, p)
            chi = self.base.demand(xh, q).new_reserves
            now = chi > xh
            if np.array_equal(now, bought):
                break
            bought = now
        else:
            chi = xh.copy()
        if not np.any(chi > xh):
            chi = xh.copy()
        x = np.where(chi > xh, xh + (chi - xh) / keep, chi)
        try:
            spot = self.gradient(x)
        except SingularSpot:
            spot = None
        s = float(x0[0] - x[0]) if x0.size == 2 else None
        return DemandResponse(x, x - x0, spot, (s, s) if s is not None else None, chi, x - chi)

    def to_json(self):
        return self.base.to_json()


def apply_fee_wrapper(fn: TradingFunction, reserves_hat, eps: float) -> FeeWrapped:
    return FeeWrapped(fn, reserves_hat, eps)


@dataclass(eq=False)
class OfferResponse:
    """Offer demand: ``sold_range`` is the interval of the sell asset it will
    part with (a point unless the rate sits exactly on its limit)."""

    sell: int
    buy: int
    rate: float
    sold_range: tuple[float, float]

    @property
    def set_valued(self) -> bool:
        return self.sold_range[0] != self.sold_range[1]

    def delta(self, n_assets: int, sold: float | None = None) -> np.ndarray:
        if sold is None:
            sold = 0.5 * (self.sold_range[0] + self.sold_range[1])
        d = np.zeros(n_assets)
        d[self.sell] = -sold
        d[self.buy] = sold * self.rate
        return d


def offer_demand(offer, prices) -> OfferResponse:
    """Demand of a limit sell or buy offer at valuations ``prices``."""
    p = np.asarray(prices, dtype=float)
    if p[offer.sell] <= 0 or p[offer.buy] <= 0:
        raise InvalidPrices("offer prices must be > 0")
    rho = float(p[offer.sell] / p[offer.buy])
    if isinstance(offer, LimitSellOffer):
        full, limit = float(offer.amount), offer.min_price
    elif isinstance(offer, LimitBuyOffer):
        # spends at most its endowment; stops once k units of the buy asset are in
        full, limit = min(float(offer.endowment_amount), offer.amount / rho), offer.limit_price
    else:
        raise TypeError(f"not an offer: {offer!r}")
    if same_rate(rho, limit):
        rng = (0.0, full)
    elif rho > limit:
        rng = (full, full)
    else:
        rng = (0.0, 0.0)
    return OfferResponse(offer.sell, offer.buy, rho, rng)


_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {"exp": np.exp, "log": np.log, "sqrt": np.sqrt, "min": np.minimum, "max": np.maximum}


def compile_expression(expr: str, symbols: Sequence[str]) -> Callable:
    """Compile an arithmetic expression over asset symbols into f(x).

    Only numbers, the given symbols, + - * / **, and exp/log/sqrt/min/max
    are accepted.
    """
    tree = ast.parse(expr, mode="eval")
    index = {s: i for i, s in enumerate(symbols)}

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            v = float(node.value)
            return lambda x: v
        if isinstance(node, ast.Name):
            if node.id not in index:
                raise ValueError(f"unknown symbol {node.id!r} in {expr!r}")
            i = index[node.id]
            return lambda x: x[i]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op, lhs, rhs = _BINOPS[type(node.op)], build(node.left), build(node.right)
            return lambda x: op(lhs(x), rhs(x))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            op, arg = _UNARY[type(node.op)], build(node.operand)
            return lambda x: op(arg(x))
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS
            and not node.keywords
        ):
            fn, args = _FUNCS[node.func.id], [build(a) for a in node.args]
            return lambda x: fn(*(a(x) for a in args))
        raise ValueError(f"unsupported syntax in expression {expr!r}: {ast.dump(node)[:60]}")

    return build(tree)
