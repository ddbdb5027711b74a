"""Random batch instances for property tests and benchmarks."""

from __future__ import annotations

import numpy as np

from .functions import ConstantProduct, ConstantSum, WeightedProduct
from .market import BatchInstance, CfmmDecl, LimitBuyOffer, LimitSellOffer

SYMBOLS = "ABCDEFGH"


def _pair(rng, n):
    a, b = rng.choice(n, size=2, replace=False)
    return int(a), int(b)


def random_instance(
    rng: np.random.Generator,
    n_assets: int | None = None,
    n_participants: int | None = None,
    families=("cp", "weighted", "sum", "offer"),
    integral: bool = False,
    buy_offers: int = 0,
) -> BatchInstance:
    """A random market of two-asset CFMMs and sell offers.

    Two-asset instances always contain a product-type CFMM, which makes
    the clearing rate unique. ``integral`` keeps every number a small
    integer or a quarter so exact arithmetic is meaningful.
    """
    n = int(n_assets or rng.integers(2, 7))
    m = int(n_participants or rng.integers(2, 11))
    parts = []

    def amount():
        return float(rng.integers(1, 21)) if integral else float(np.exp(rng.uniform(np.log(0.5), np.log(50))))

    def rate():
        return float(rng.integers(1, 17)) / 4 if integral else float(np.exp(rng.uniform(-1.5, 1.5)))

    for k in range(m):
        fam = families[int(rng.integers(len(families)))]
        if k == 0 and n == 2:
            fam = "cp" if "cp" in families else fam
        a, b = _pair(rng, n)
        if fam == "cp":
            parts.append(CfmmDecl(f"cp{k}", (a, b), [amount(), amount()], ConstantProduct()))
        elif fam == "weighted":
            w = (float(rng.integers(1, 4)), float(rng.integers(1, 4)))
            parts.append(CfmmDecl(f"wp{k}", (a, b), [amount(), amount()], WeightedProduct(*w)))
        elif fam == "sum":
            parts.append(CfmmDecl(f"cs{k}", (a, b), [amount(), amount()], ConstantSum(rate())))
        else:
            parts.append(LimitSellOffer(a, b, amount(), rate(), id=f"o{k}"))
    for k in range(buy_offers):
        a, b = _pair(rng, n)
        parts.append(LimitBuyOffer(a, b, amount(), amount(), rate(), id=f"b{k}"))
    return BatchInstance.from_symbols(SYMBOLS[:n], parts)
