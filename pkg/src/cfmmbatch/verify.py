"""Named checks over an (instance, solution) pair.

walras               every participant's trade is worth zero at p
conservation         per-asset net flow is zero
cfmm_nondecreasing   f(new) >= f(old) for every CFMM
cfmm_independence    every CFMM trade equals its own demand response at p
no_internal_arbitrage  CFMMs sharing a pair quote the same post-trade spot rate
spot_alignment       post-trade CFMM spot valuations are proportional to p
offer_limits         offers never trade beyond their limits

Residuals are relative: flows against the per-asset scale (total endowment),
values against p . scale, function values against max(1, |f(old)|).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .demand import respond
from .errors import IncompleteSolution, SingularSpot
from .functions import FeeWrapped, fee_image
from .market import BatchInstance, BatchSolution, CfmmDecl, LimitBuyOffer, LimitSellOffer

CHECKS = (
    "walras",
    "conservation",
    "cfmm_nondecreasing",
    "cfmm_independence",
    "no_internal_arbitrage",
    "spot_alignment",
    "offer_limits",
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    residual: float
    detail: str = ""
    applicable: bool = True


@dataclass
class VerifierReport:
    checks: list[CheckResult]
    tol: float
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __iter__(self):
        return iter(self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_json(self) -> dict:
        return {"passed": self.passed, "tol": self.tol, "checks": [asdict(c) for c in self.checks]}

    def table(self) -> str:
        rows = [f"{'check':<24}{'result':<8}{'residual':>12}  detail"]
        for c in self.checks:
            verdict = "n/a" if not c.applicable else ("pass" if c.passed else "FAIL")
            rows.append(f"{c.name:<24}{verdict:<8}{c.residual:>12.3e}  {c.detail}")
        return "\n".join(rows)


def _trades(inst: BatchInstance, sol: BatchSolution) -> np.ndarray:
    t = np.asarray(sol.trades, dtype=float)
    want = (len(inst.participants), inst.n_assets)
    if not inst.participants:
        return np.zeros(want)
    if t.shape != want:
        raise IncompleteSolution(f"solution has trades of shape {t.shape}, expected {want}")
    return t


def _worst(items):
    """(residual, detail) of the largest item, (0, '') when empty."""
    best = (0.0, "")
    for r, d in items:
        if r > best[0] or (math.isnan(r)):
            best = (r, d)
    return best


def _new_reserves(part: CfmmDecl, d: np.ndarray) -> np.ndarray:
    return part.reserves + d[list(part.assets)]


def _kkt_gap(lo: np.ndarray, hi: np.ndarray, p: np.ndarray, x: np.ndarray) -> float:
    """Relative violation of 'x maximizes f on its budget line' given
    per-asset bounds lo <= grad <= hi (equal where f is differentiable):
    some common multiple of p must fit every bracket on the support of x
    and sit above the lower bound off it."""
    live = x > 0
    if not live.any():
        return 0.0
    top = float((hi / p)[live].min())
    low = float((lo / p)[live].max())
    if top <= 0:
        return math.inf
    gap = (low - top) / low if low > top else 0.0
    if (~live).any():
        gap = max(gap, float((lo / p)[~live].max()) / max(top, low) - 1.0)
    return max(gap, 0.0)


def gradient_bracket(part: CfmmDecl, x: np.ndarray, band=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-asset (lo, hi) bounds on the effective gradient at reserves x.
    They coincide except for a fee-wrapped function within ``band`` of its
    pre-batch reserves, where the kink admits anything in between."""
    fn = part.effective_function()
    if not isinstance(fn, FeeWrapped):
        g = np.asarray(fn.gradient(x), dtype=float)
        return g, g
    g = np.asarray(fn.base.gradient(fee_image(x, fn.reserves_hat, fn.eps)), dtype=float)
    keep = 1.0 - fn.eps
    at = np.abs(x - fn.reserves_hat) <= (band if band is not None else 0.0)
    up = x > fn.reserves_hat
    return np.where(up | at, keep * g, g), np.where(up & ~at, keep * g, g)


def post_spot_gap(part: CfmmDecl, d: np.ndarray, p: np.ndarray, band=None) -> float | None:
    """Alignment gap of the CFMM's (effective) trading function after the
    trade; None when the gradient is not defined there."""
    x = _new_reserves(part, d)
    try:
        lo, hi = gradient_bracket(part, x, band)
    except (SingularSpot, NotImplementedError):
        return None
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        return None
    return _kkt_gap(lo, hi, p[list(part.assets)], x)


def verify_solution(inst: BatchInstance, sol: BatchSolution, tol: float | None = None) -> VerifierReport:
    if tol is None:
        tol = float(sol.info.get("tol", inst.tol)) if isinstance(sol.info, dict) else inst.tol
    trades = _trades(inst, sol)
    p = np.asarray(sol.prices, dtype=float)
    n = inst.n_assets
    scale = inst.scale()
    value = float(p @ scale)
    checks: list[CheckResult] = []
    notes: list[str] = []

    # walras
    w = np.abs(trades @ p) / value if trades.size else np.zeros(0)
    k = int(np.argmax(w)) if w.size else -1
    r = float(w.max()) if w.size else 0.0
    checks.append(CheckResult("walras", r <= tol, r, f"participant {k}" if r > tol else ""))

    # conservation
    flow = np.abs(trades.sum(axis=0)) / scale if trades.size else np.zeros(n)
    r = float(flow.max()) if flow.size else 0.0
    a = int(np.argmax(flow)) if flow.size else 0
    checks.append(CheckResult("conservation", r <= tol, r, f"asset {inst.symbols[a]}" if r > tol else ""))

    cfmms = inst.cfmms()

    # cfmm_nondecreasing
    items = []
    skipped = []
    for i, part in cfmms:
        fn = part.effective_function()
        try:
            f0 = fn.value(part.reserves)
            f1 = fn.value(_new_reserves(part, trades[i]))
        except NotImplementedError:
            skipped.append(part.id)
            continue
        if np.any(_new_reserves(part, trades[i]) < -tol * scale[list(part.assets)]):
            items.append((math.inf, f"{part.id}: negative reserves"))
            continue
        items.append((max(0.0, (f0 - f1) / max(1.0, abs(f0))), part.id))
    if skipped:
        notes.append(f"cfmm_nondecreasing skipped for {', '.join(skipped)} (no trading function value)")
    r, d = _worst(items)
    checks.append(CheckResult("cfmm_nondecreasing", r <= tol, r, d if r > tol else "", applicable=bool(items) or not cfmms))

    # cfmm_independence: the recorded trade must lie on the CFMM's own response
    items = []
    for i, part in cfmms:
        resp = respond(part, p, n)
        dvec = resp.direction
        t = 0.0
        if resp.set_valued:
            t = float(np.clip((trades[i] - resp.base) @ dvec / (dvec @ dvec), 0.0, 1.0))
        gap = np.abs(resp.at(t) - trades[i]) / scale
        items.append((float(gap.max()), part.id))
    r, d = _worst(items)
    checks.append(CheckResult("cfmm_independence", r <= tol, r, d if r > tol else "", applicable=bool(cfmms)))

    # no_internal_arbitrage: CFMMs on a shared pair must quote overlapping
    # rate ranges (a single rate each unless sitting on a fee kink)
    quotes: dict[tuple[int, int], list[tuple[float, float, str]]] = {}
    for i, part in cfmms:
        x = _new_reserves(part, trades[i])
        try:
            lo, hi = gradient_bracket(part, x, tol * scale[list(part.assets)])
        except (SingularSpot, NotImplementedError):
            continue
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))) or np.any(x <= 0) or np.any(lo <= 0):
            continue  # corners quote a range, not a rate
        idx = list(part.assets)
        for u in range(len(idx)):
            for v in range(u + 1, len(idx)):
                if idx[u] > idx[v]:
                    u, v = v, u
                key = (idx[u], idx[v])
                quotes.setdefault(key, []).append((lo[u] / hi[v], hi[u] / lo[v], part.id))
    items = []
    for key, qs in quotes.items():
        if len(qs) < 2:
            continue
        floor = max(q[0] for q in qs)
        ceil = min(q[1] for q in qs)
        items.append((max(0.0, (floor - ceil) / floor), f"{inst.symbols[key[0]]}/{inst.symbols[key[1]]}"))
    r, d = _worst(items)
    checks.append(CheckResult("no_internal_arbitrage", r <= tol, r, d if r > tol else "", applicable=bool(items)))

    # spot_alignment
    items = []
    for i, part in cfmms:
        gap = post_spot_gap(part, trades[i], p, tol * scale[list(part.assets)])
        if gap is None:
            # no gradient: the post-trade state must be its own response at p
            post = part.with_reserves(_new_reserves(part, trades[i]))
            resp = respond(post, p, n)
            t = 0.0
            if resp.set_valued:
                t = float(np.clip(-resp.base @ resp.direction / (resp.direction @ resp.direction), 0.0, 1.0))
            gap = float((np.abs(resp.at(t)) / scale).max())
        items.append((gap, part.id))
    r, d = _worst(items)
    checks.append(CheckResult("spot_alignment", r <= tol, r, d if r > tol else "", applicable=bool(cfmms)))

    # offer_limits
    items = []
    any_offer = False
    for i, part in enumerate(inst.participants):
        if not isinstance(part, (LimitSellOffer, LimitBuyOffer)):
            continue
        any_offer = True
        items.append(_offer_gap(part, trades[i], p, scale, tol, i))
    r, d = _worst(items)
    checks.append(CheckResult("offer_limits", r <= tol, r, d if r > tol else "", applicable=any_offer))

    return VerifierReport(checks, tol, notes)


def _offer_gap(part, d: np.ndarray, p: np.ndarray, scale: np.ndarray, tol: float, i: int):
    """Worst relative violation for one offer: wrong assets, overselling,
    a worse rate than its limit, or leaving an in-the-money order unfilled."""
    sold = -float(d[part.sell])
    got = float(d[part.buy])
    other = np.delete(d, [part.sell, part.buy])
    out = [(float(np.abs(other).max(initial=0.0) / scale.max()), f"participant {i}: trades a third asset")]
    s_sell, s_buy = scale[part.sell], scale[part.buy]
    out.append((max(0.0, -sold) / s_sell, f"participant {i}: buys its sell asset"))
    out.append((max(0.0, -got) / s_buy, f"participant {i}: pays in its buy asset"))
    limit = part.min_price if isinstance(part, LimitSellOffer) else part.limit_price
    cap = part.amount if isinstance(part, LimitSellOffer) else part.endowment_amount
    out.append((max(0.0, sold - cap) / s_sell, f"participant {i}: sells more than offered"))
    if isinstance(part, LimitBuyOffer):
        out.append((max(0.0, got - part.amount) / s_buy, f"participant {i}: buys more than wanted"))
    if sold > tol * s_sell:
        # realized rate (buy units per sell unit) must not be worse than the limit
        out.append((max(0.0, 1.0 - got / (sold * limit)), f"participant {i}: trades below its limit price"))
    rho = float(p[part.sell] / p[part.buy])
    if rho > limit * (1 + tol):
        full = cap if isinstance(part, LimitSellOffer) else min(cap, part.amount / rho)
        out.append((max(0.0, full - sold) / s_sell, f"participant {i}: in the money but not filled"))
    return _worst(out)


def check_nobeyond(inst: BatchInstance, sol: BatchSolution, tol: float | None = None) -> CheckResult:
    """Every two-asset CFMM's post-trade spot rate lies between its pre-batch
    spot rate and the batch rate."""
    tol = inst.tol if tol is None else tol
    trades = _trades(inst, sol)
    p = np.asarray(sol.prices, dtype=float)
    items = []
    for i, part in inst.cfmms():
        if len(part.assets) != 2:
            continue
        fn = part.effective_function()
        try:
            g0 = fn.gradient(part.reserves)
            g2 = fn.gradient(_new_reserves(part, trades[i]))
        except (SingularSpot, NotImplementedError):
            continue
        a, b = part.assets
        r0, r1, r2 = g0[0] / g0[1], p[a] / p[b], g2[0] / g2[1]
        lo, hi = min(r0, r1), max(r0, r1)
        gap = max(0.0, lo - r2, r2 - hi) / max(hi, 1e-300)
        items.append((gap, f"{part.id}: r0={r0:.6g} r1={r1:.6g} r2={r2:.6g}"))
    r, d = _worst(items)
    return CheckResult("nobeyond", r <= tol, r, d if r > tol else "", applicable=bool(items))
