"""Domain types for a clearing round: assets, offers, CFMM declarations,
instances and solutions, plus price normalization and flow accounting.

All math is done on dense asset indices; symbols only appear at I/O.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Union

import numpy as np

from .errors import InvalidPrices, TradeShapeError

if TYPE_CHECKING:  # pragma: no cover
    from .functions import TradingFunction

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class AssetId:
    symbol: str
    index: int


@dataclass(frozen=True, eq=False)
class PriceVector:
    """Strictly positive per-asset valuations. The A->B rate is p[A]/p[B]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise InvalidPrices("price vector must be a non-empty 1-D array")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise InvalidPrices(f"prices must be finite and > 0, got {v}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __getitem__(self, i):
        return self.values[i]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __eq__(self, other):
        return isinstance(other, PriceVector) and np.array_equal(self.values, other.values)

    def rate(self, sell: int, buy: int) -> float:
        return float(self.values[sell] / self.values[buy])

    def normalized(self) -> PriceVector:
        return normalize_prices(self)


def normalize_prices(p) -> PriceVector:
    """Divide by the smallest entry, so the minimum is exactly 1."""
    if not isinstance(p, PriceVector):
        p = PriceVector(np.asarray(p, dtype=float))
    v = p.values / p.values.min()
    v[np.argmin(p.values)] = 1.0
    return PriceVector(v)


@dataclass(frozen=True)
class LimitSellOffer:
    """Sell up to ``amount`` of ``sell`` for ``buy`` at no less than
    ``min_price`` units of ``buy`` per unit of ``sell`` (utility r0*a + b)."""

    sell: int
    buy: int
    amount: float
    min_price: float
    id: str | None = None

    def endowment(self, n_assets: int) -> np.ndarray:
        e = np.zeros(n_assets)
        e[self.sell] = self.amount
        return e


@dataclass(frozen=True)
class LimitBuyOffer:
    """Buy up to ``amount`` (k) of ``buy`` paying with an ``endowment`` of
    ``sell``; trades when the rate beats ``limit_price`` (utility r0*a + min(k, b))."""

    sell: int
    buy: int
    endowment_amount: float
    amount: float
    limit_price: float
    id: str | None = None

    def endowment(self, n_assets: int) -> np.ndarray:
        e = np.zeros(n_assets)
        e[self.sell] = self.endowment_amount
        return e


@dataclass(frozen=True, eq=False)
class CfmmDecl:
    id: str
    assets: tuple[int, ...]
    reserves: np.ndarray
    function: TradingFunction
    fee: float = 0.0

    def __post_init__(self):
        r = np.array(self.reserves, dtype=float)
        r.flags.writeable = False
        object.__setattr__(self, "reserves", r)
        object.__setattr__(self, "assets", tuple(int(a) for a in self.assets))

    def endowment(self, n_assets: int) -> np.ndarray:
        e = np.zeros(n_assets)
        if len(self.assets) == self.reserves.size:
            e[list(self.assets)] = self.reserves
        return e

    def effective_function(self) -> TradingFunction:
        """The trading function actually used this batch (fee-wrapped if fee > 0)."""
        if self.fee:
            from .functions import apply_fee_wrapper

            return apply_fee_wrapper(self.function, self.reserves, self.fee)
        return self.function

    def with_reserves(self, reserves) -> CfmmDecl:
        return CfmmDecl(self.id, self.assets, np.asarray(reserves, float), self.function, self.fee)


Participant = Union[LimitSellOffer, LimitBuyOffer, CfmmDecl]


@dataclass(frozen=True, eq=False)
class BatchInstance:
    assets: tuple[AssetId, ...]
    participants: tuple[Participant, ...]
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "assets", tuple(self.assets))
        object.__setattr__(self, "participants", tuple(self.participants))

    @classmethod
    def from_symbols(cls, symbols, participants, options=None) -> BatchInstance:
        assets = tuple(AssetId(s, i) for i, s in enumerate(symbols))
        return cls(assets, tuple(participants), dict(options or {}))

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    @property
    def symbols(self) -> list[str]:
        return [a.symbol for a in self.assets]

    @property
    def tol(self) -> float:
        return float(self.options.get("tol", DEFAULT_TOL))

    def index(self, symbol: str) -> int:
        for a in self.assets:
            if a.symbol == symbol:
                return a.index
        raise KeyError(symbol)

    def endowments(self) -> np.ndarray:
        """Participants x assets matrix of pre-batch holdings."""
        n = self.n_assets
        if not self.participants:
            return np.zeros((0, n))
        return np.array([p.endowment(n) for p in self.participants])

    def scale(self) -> np.ndarray:
        """Total endowment per asset, floored at 1 so residuals stay unit-free."""
        tot = self.endowments().sum(axis=0) if self.participants else np.zeros(self.n_assets)
        return np.maximum(tot, 1.0)

    def cfmms(self) -> list[tuple[int, CfmmDecl]]:
        return [(i, p) for i, p in enumerate(self.participants) if isinstance(p, CfmmDecl)]


@dataclass(eq=False)
class BatchSolution:
    prices: PriceVector
    trades: np.ndarray
    objective_value: float = 0.0
    iterations: int = 0
    verifier_report: list = field(default_factory=list)
    solver: str = ""
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.trades = np.atleast_2d(np.asarray(self.trades, dtype=float))

    @property
    def valid(self) -> bool:
        return all(c.passed for c in self.verifier_report)

    def rate(self, sell: int, buy: int) -> float:
        return self.prices.rate(sell, buy)


@dataclass(frozen=True)
class Violation:
    code: str
    participant: int | None
    message: str
    severity: str = "error"


def validate_instance(inst: BatchInstance) -> list[Violation]:
    """Structural checks. Returns the list of problems (empty when well-formed)."""
    out: list[Violation] = []
    n = inst.n_assets
    symbols = [a.symbol for a in inst.assets]
    if len(set(symbols)) != len(symbols):
        out.append(Violation("duplicate-asset", None, "asset symbols must be unique"))
    if [a.index for a in inst.assets] != list(range(n)):
        out.append(Violation("asset-index", None, "asset indices must be 0..N-1"))
    if not inst.participants:
        out.append(Violation("empty", None, "instance has no participants"))

    def known(a):
        return isinstance(a, (int, np.integer)) and 0 <= a < n

    for i, p in enumerate(inst.participants):
        if isinstance(p, (LimitSellOffer, LimitBuyOffer)):
            if not (known(p.sell) and known(p.buy)):
                out.append(Violation("unknown-asset", i, "offer references an undeclared asset"))
            elif p.sell == p.buy:
                out.append(Violation("self-trade", i, "offer sells and buys the same asset"))
            amounts = [p.amount] + ([p.endowment_amount] if isinstance(p, LimitBuyOffer) else [])
            if any(a < 0 for a in amounts):
                out.append(Violation("negative-amount", i, "offer amount must be >= 0"))
            price = p.min_price if isinstance(p, LimitSellOffer) else p.limit_price
            if not price > 0:
                out.append(Violation("negative-amount", i, "limit price must be > 0"))
        elif isinstance(p, CfmmDecl):
            if not all(known(a) for a in p.assets):
                out.append(Violation("unknown-asset", i, "CFMM references an undeclared asset"))
            elif len(set(p.assets)) != len(p.assets):
                out.append(Violation("self-trade", i, "CFMM lists an asset twice"))
            arity = getattr(p.function, "n_assets", None)
            if p.reserves.size != len(p.assets) or (arity is not None and arity != len(p.assets)):
                out.append(Violation("arity", i, "reserve/asset count does not match the function"))
            if np.any(p.reserves < 0):
                out.append(Violation("negative-amount", i, "CFMM reserves must be >= 0"))
            if not 0 <= p.fee < 1:
                out.append(Violation("fee", i, "fee must lie in [0, 1)"))
            if len(p.assets) > 2 and getattr(p.function, "kind", "") == "custom":
                out.append(
                    Violation(
                        "multi-asset-custom",
                        i,
                        "3+-asset custom functions are only supported by tatonnement",
                        severity="warning",
                    )
                )
        else:
            out.append(Violation("unknown-participant", i, f"unsupported participant {type(p).__name__}"))
    return out


def net_flows(inst: BatchInstance, sol: BatchSolution) -> np.ndarray:
    """Per-asset sum of all participants' trade deltas (zero at equilibrium)."""
    trades = np.asarray(sol.trades, dtype=float)
    if trades.size == 0:
        return np.zeros(inst.n_assets)
    if trades.shape != (len(inst.participants), inst.n_assets):
        raise TradeShapeError(
            f"trades shape {trades.shape} != ({len(inst.participants)}, {inst.n_assets})"
        )
    return trades.sum(axis=0)


def walras_residuals(prices, trades) -> np.ndarray:
    """Per-participant value of its net trade, p . delta."""
    return np.asarray(trades, float) @ np.asarray(prices, float)


def describe(inst: BatchInstance) -> dict[str, Any]:
    counts: dict[str, int] = {}
    for p in inst.participants:
        key = type(p).__name__
        counts[key] = counts.get(key, 0) + 1
    return {"assets": inst.symbols, "participants": counts}
