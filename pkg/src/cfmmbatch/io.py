"""JSON encodings of instances, solutions and sequences.

Instance::

    {"assets": ["A", "B"],
     "participants": [
        {"type": "limit_sell", "sell": "A", "buy": "B", "amount": 100, "min_price": 0.5},
        {"type": "limit_buy", "sell": "B", "buy": "A", "endowment": 50, "amount": 40, "limit_price": 0.5},
        {"type": "cfmm", "id": "m1", "assets": ["A", "B"], "reserves": [1, 1],
         "function": {"kind": "lmsr"}, "fee": 0}],
     "options": {}}

Any number may also be written {"num": "1", "den": "6"}.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .density import DensityPair, half_from_json
from .errors import InstanceError
from .functions import ConstantProduct, ConstantSum, Custom, HSpec, Lmsr, Monomial, TradingFunction, WeightedProduct
from .market import BatchInstance, BatchSolution, CfmmDecl, LimitBuyOffer, LimitSellOffer, PriceVector


def number(v) -> float:
    if isinstance(v, dict) and "num" in v:
        return float(Fraction(int(v["num"]), int(v["den"])))
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise InstanceError(f"expected a number, got {v!r}")
    return float(v)


def fraction_json(q: Fraction) -> dict:
    return {"num": str(q.numerator), "den": str(q.denominator)}


def function_from_json(obj: dict, symbols=None) -> TradingFunction:
    kind = obj.get("kind")
    if kind == "constant_product":
        return ConstantProduct()
    if kind == "weighted_product":
        w = obj["weights"]
        return WeightedProduct(number(w[0]), number(w[1]))
    if kind == "monomial":
        return Monomial([number(e) for e in obj["exponents"]])
    if kind == "constant_sum":
        return ConstantSum(number(obj["rate"]))
    if kind == "lmsr":
        return Lmsr(int(obj.get("n_assets", len(symbols) if symbols else 2)))
    if kind == "hspec":
        return HSpec([number(c) for c in obj["coefficients"]])
    if kind == "custom":
        names = obj.get("symbols") or symbols
        if not names:
            raise InstanceError("custom function needs symbols")
        return Custom.from_expression(obj["expr"], list(names))
    if kind == "density_pair":
        a, b = (half_from_json(h) for h in obj["halves"])
        return DensityPair(a, b)
    raise InstanceError(f"unknown trading function kind {kind!r}")


def _asset(symbols: list[str], name, where: str) -> int:
    try:
        return symbols.index(name)
    except ValueError:
        raise InstanceError(f"{where}: unknown asset {name!r}") from None


def instance_from_json(obj: dict) -> BatchInstance:
    try:
        symbols = [str(s) for s in obj["assets"]]
        parts = []
        for i, p in enumerate(obj.get("participants", [])):
            where = f"participant {i}"
            t = p.get("type")
            if t == "limit_sell":
                parts.append(LimitSellOffer(_asset(symbols, p["sell"], where), _asset(symbols, p["buy"], where),
                                            number(p["amount"]), number(p["min_price"]), p.get("id")))
            elif t == "limit_buy":
                parts.append(LimitBuyOffer(_asset(symbols, p["sell"], where), _asset(symbols, p["buy"], where),
                                           number(p["endowment"]), number(p["amount"]), number(p["limit_price"]),
                                           p.get("id")))
            elif t == "cfmm":
                assets = [_asset(symbols, a, where) for a in p["assets"]]
                fn = function_from_json(p["function"], [symbols[a] for a in assets])
                parts.append(CfmmDecl(str(p.get("id", f"cfmm{i}")), tuple(assets),
                                      np.array([number(r) for r in p["reserves"]]), fn, number(p.get("fee", 0))))
            else:
                raise InstanceError(f"{where}: unknown participant type {t!r}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InstanceError):
            raise
        raise InstanceError(f"malformed instance: {exc!r}") from exc
    inst = BatchInstance.from_symbols(symbols, parts, obj.get("options", {}))
    from .market import validate_instance

    errors = [v for v in validate_instance(inst) if v.severity == "error" and v.code != "empty"]
    if errors:
        raise InstanceError("; ".join(f"{v.code} (participant {v.participant}): {v.message}" for v in errors))
    return inst


def instance_to_json(inst: BatchInstance) -> dict:
    sym = inst.symbols
    parts = []
    for p in inst.participants:
        if isinstance(p, LimitSellOffer):
            d = {"type": "limit_sell", "sell": sym[p.sell], "buy": sym[p.buy], "amount": p.amount, "min_price": p.min_price}
        elif isinstance(p, LimitBuyOffer):
            d = {"type": "limit_buy", "sell": sym[p.sell], "buy": sym[p.buy], "endowment": p.endowment_amount,
                 "amount": p.amount, "limit_price": p.limit_price}
        else:
            d = {"type": "cfmm", "id": p.id, "assets": [sym[a] for a in p.assets],
                 "reserves": p.reserves.tolist(), "function": p.function.to_json(), "fee": p.fee}
        if getattr(p, "id", None) is not None and "id" not in d:
            d["id"] = p.id
        parts.append(d)
    return {"assets": sym, "participants": parts, "options": dict(inst.options)}


def _label(p, i: int) -> str:
    return p.id if getattr(p, "id", None) else f"#{i}"


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v


def solution_to_json(inst: BatchInstance, sol: BatchSolution, rational=None) -> dict:
    sym = inst.symbols
    p = np.asarray(sol.prices, dtype=float)
    trades = np.asarray(sol.trades, dtype=float).reshape(len(inst.participants), inst.n_assets)
    out = {
        "solver": sol.solver,
        "prices": {s: float(v) for s, v in zip(sym, p)},
        "trades": [{"participant": _label(part, i), "delta": {s: float(v) for s, v in zip(sym, trades[i])}}
                   for i, part in enumerate(inst.participants)],
        "objective": float(sol.objective_value),
        "iterations": int(sol.iterations),
        "tol": float(sol.info.get("tol", inst.tol)),
    }
    if rational is not None:
        out["rational"] = {
            "prices": {s: fraction_json(q) for s, q in zip(sym, rational.prices)},
            "trades": [{"participant": _label(part, i), "delta": {s: fraction_json(q) for s, q in zip(sym, row)}}
                       for i, (part, row) in enumerate(zip(inst.participants, rational.trades))],
        }
    return _plain(out)


def solution_from_json(inst: BatchInstance, obj: dict) -> BatchSolution:
    sym = inst.symbols
    try:
        p = np.array([number(obj["prices"][s]) for s in sym])
        rows = obj["trades"]
        trades = np.array([[number(r["delta"].get(s, 0.0)) for s in sym] for r in rows]).reshape(len(rows), len(sym))
    except (KeyError, TypeError) as exc:
        raise InstanceError(f"malformed solution: {exc!r}") from exc
    info = {"tol": float(obj["tol"])} if "tol" in obj else {}
    return BatchSolution(PriceVector(p), trades, float(obj.get("objective", 0.0)), int(obj.get("iterations", 0)),
                         solver=str(obj.get("solver", "")), info=info)


def load_json(path) -> object:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: invalid JSON ({exc})") from exc


def load_instance(path) -> BatchInstance:
    return instance_from_json(load_json(path))


def load_sequence(path) -> list[BatchInstance]:
    obj = load_json(path)
    if isinstance(obj, dict):
        obj = obj.get("batches")
    if not isinstance(obj, list):
        raise InstanceError("a sequence file is a JSON array of instances")
    return [instance_from_json(b) for b in obj]
