"""Sampled falsification probes for CFMM trading functions.

The probes look for counterexamples; a pass means none was found among the
sampled points, not a proof. Sampling is seeded so verdicts are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import InvalidAlpha, SingularSpot
from .functions import TradingFunction

DECADES = 2.0


@dataclass
class ProbeResult:
    name: str
    passed: bool
    samples: int
    witness: dict | None = None
    worst: float = 0.0
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        def enc(v):
            return v.tolist() if isinstance(v, np.ndarray) else v

        w = {k: enc(v) for k, v in self.witness.items()} if self.witness else None
        return {"name": self.name, "passed": self.passed, "samples": self.samples, "witness": w, "worst": self.worst}


def _center(fn: TradingFunction, reserves: np.ndarray) -> np.ndarray:
    """Spot valuations at the reserves (all ones when undefined)."""
    try:
        g = np.asarray(fn.gradient(reserves), dtype=float)
    except (SingularSpot, NotImplementedError, ValueError):
        return np.ones(reserves.size)
    if not np.all(np.isfinite(g)) or np.any(g <= 0):
        return np.ones(reserves.size)
    return g / g.min()


def _holdings(fn: TradingFunction, reserves, p) -> np.ndarray:
    return np.asarray(fn.demand(reserves, p).new_reserves, dtype=float)


def wgs_probe(fn: TradingFunction, reserves, samples: int = 256, seed: int = 0, decades: float = DECADES,
              rtol: float = 1e-9) -> ProbeResult:
    """Raise one price and look for another asset whose holding drops.

    Base prices are drawn log-uniformly within ``decades`` of the spot
    valuations; the raised price goes up by a factor in (1, 10**decades].
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    x0 = np.asarray(reserves, dtype=float)
    n = x0.size
    rng = np.random.default_rng(seed)
    center = _center(fn, x0)
    worst = 0.0
    for k in range(samples):
        p = center * 10.0 ** rng.uniform(-decades, decades, n)
        j = int(rng.integers(n))
        q = p.copy()
        q[j] *= 10.0 ** rng.uniform(0.0, decades)
        x, y = _holdings(fn, x0, p), _holdings(fn, x0, q)
        budget = float(p @ x0)
        for a in range(n):
            if a == j:
                continue
            slack = rtol * max(1.0, budget / p[a], budget / q[a])
            drop = x[a] - y[a]
            worst = max(worst, drop / max(1.0, abs(x[a])))
            if drop > slack:
                w = {"p": p, "p_raised": q, "raised": j, "asset": a, "before": float(x[a]), "after": float(y[a])}
                return ProbeResult("wgs", False, k + 1, w, worst)
    return ProbeResult("wgs", True, samples, None, worst)


def _angle(u: np.ndarray, v: np.ndarray) -> float:
    # chord form; acos loses half the digits near zero
    d = float(np.linalg.norm(u / np.linalg.norm(u) - v / np.linalg.norm(v)))
    return 2.0 * math.asin(min(1.0, d / 2.0))


def budget_invariance_probe(fn: TradingFunction, samples: int = 256, seed: int = 0, tol: float = 1e-7,
                            decades: float = DECADES) -> ProbeResult:
    """(a) optimal bundles scale with the budget; (b) the spot direction is
    constant along rays t*x. Both must hold to within ``tol``."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n = fn.n_assets or 2
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(samples):
        x0 = 10.0 ** rng.uniform(-1.0, 1.0, n)
        t = 10.0 ** rng.uniform(-decades, decades)
        p = _center(fn, x0) * 10.0 ** rng.uniform(-decades / 2, decades / 2, n)
        small, big = _holdings(fn, x0, p), _holdings(fn, t * x0, p)
        dev = float(np.linalg.norm(big - t * small) / max(np.linalg.norm(t * small), 1e-300))
        worst = max(worst, dev)
        if dev > tol:
            w = {"test": "bundle", "reserves": x0, "budget_factor": t, "p": p, "bundle": small, "scaled_bundle": big}
            return ProbeResult("budget", False, k + 1, w, worst)
        try:
            g1, g2 = np.asarray(fn.gradient(x0), float), np.asarray(fn.gradient(t * x0), float)
        except (SingularSpot, NotImplementedError):
            continue
        ang = _angle(g1, g2)
        worst = max(worst, ang)
        if ang > tol:
            w = {"test": "ray", "x": x0, "t": t, "grad": g1, "grad_scaled": g2}
            return ProbeResult("budget", False, k + 1, w, worst)
    return ProbeResult("budget", True, samples, None, worst)


def _check_alpha(alpha: float):
    if not 0.0 <= alpha <= 1.0:
        raise InvalidAlpha(f"alpha must lie in [0, 1], got {alpha}")


def trading_rule_family(s, p, alpha: float) -> np.ndarray:
    """Post-batch spot valuations s^(1-alpha) * p^alpha."""
    _check_alpha(alpha)
    s = np.asarray(s, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(s <= 0) or np.any(p <= 0):
        raise ValueError("valuations must be positive")
    return s ** (1.0 - alpha) * p**alpha


def _pair_rule(r: float, q: float, alpha: float) -> float:
    return r ** (1.0 - alpha) * q**alpha


def family_identity_check(samples: int = 10_000, seed: int = 0, tol: float = 1e-12) -> ProbeResult:
    """Redenomination equivariance and pairwise composition on random triples."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(samples):
        s = 10.0 ** rng.uniform(-3, 3, 3)
        p = 10.0 ** rng.uniform(-3, 3, 3)
        alpha = float(rng.uniform())
        c = 10.0 ** rng.uniform(-3, 3)
        f = trading_rule_family(s, p, alpha)
        err = float(np.max(np.abs(trading_rule_family(c * s, c * p, alpha) / (c * f) - 1.0)))
        ab = _pair_rule(s[0] / s[1], p[0] / p[1], alpha)
        bc = _pair_rule(s[1] / s[2], p[1] / p[2], alpha)
        ac = _pair_rule(s[0] / s[2], p[0] / p[2], alpha)
        err = max(err, abs(ab * bc / ac - 1.0), abs((f[0] / f[1]) / ab - 1.0))
        worst = max(worst, err)
        if err > tol:
            w = {"s": s, "p": p, "alpha": alpha, "c": c, "error": err}
            return ProbeResult("rule-family", False, k + 1, w, worst)
    return ProbeResult("rule-family", True, samples, None, worst)


def rule_demand(fn: TradingFunction, reserves, prices, alpha: float) -> np.ndarray:
    """New reserves on the budget line whose spot valuations follow the
    family rule. alpha = 1 is the demand response itself."""
    _check_alpha(alpha)
    x0 = np.asarray(reserves, dtype=float)
    p = np.asarray(prices, dtype=float)
    target = trading_rule_family(fn.gradient(x0), p, alpha)
    if alpha == 1.0:
        return np.asarray(fn.demand(x0, target).new_reserves, dtype=float)
    if alpha == 0.0:
        return x0.copy()  # the target is the current spot
    if x0.size != 2:
        raise ValueError("alpha < 1 reconstruction is implemented for two assets")
    want = math.log(target[0] / target[1])
    budget = float(p @ x0)

    def gap(w):
        x = np.array([w * budget / p[0], (1.0 - w) * budget / p[1]])
        g = fn.gradient(x)
        return math.log(g[0] / g[1]) - want

    w0 = p[0] * x0[0] / budget
    if gap(w0) == 0.0:
        return x0.copy()
    lo, hi = 1e-15, 1.0 - 1e-15
    w = optimize.brentq(gap, lo, hi, xtol=1e-15)
    return np.array([w * budget / p[0], (1.0 - w) * budget / p[1]])
