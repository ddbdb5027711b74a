"""numpy implementation of the per-half kernels (fallback backend).

Halves are encoded as parallel arrays: kind (0 jump, 1 hyperbolic,
anything else handled by the caller), and two parameters
    jump:       p0 = size,  p1 = limit rate
    hyperbolic: p0 = alpha, p1 = beta      D(z) = max(0, alpha - beta/z)
Generic entries come back as nan.
"""

import numpy as np

BACKEND = "python"

# volumes up to this factor over capacity count as full (y/p round trips)
CAP = 1.0 + 1e-12


def _split(kind):
    kind = np.asarray(kind)
    return kind == 0, kind == 1


def half_sold(kind, p0, p1, z):
    jump, hyp = _split(kind)
    z = np.asarray(z, dtype=float)
    out = np.full(z.shape, np.nan)
    out[jump] = np.where(z[jump] > p1[jump], p0[jump], 0.0)
    a, b, zz = p0[hyp], p1[hyp], z[hyp]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[hyp] = np.where(a * zz > b, a - b / zz, 0.0)
    return out


def half_phi(kind, p0, p1, z):
    jump, hyp = _split(kind)
    z = np.asarray(z, dtype=float)
    out = np.full(z.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[jump] = p0[jump] * np.maximum(0.0, np.log(z[jump] / p1[jump]))
        a, b, zz = p0[hyp], p1[hyp], z[hyp]
        live = a * zz > b
        val = a * np.log(a * zz / b) - a + b / zz
    out[hyp] = np.where(live, val, 0.0)
    return out


def half_negg(kind, p0, p1, x):
    jump, hyp = _split(kind)
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, np.nan)
    xj = x[jump]
    out[jump] = np.where(xj <= p0[jump] * CAP, xj * np.log(p1[jump]), np.inf)
    a, b, xh = p0[hyp], p1[hyp], x[hyp]
    r = a - xh
    r = np.where((r < 0) & (xh <= a * CAP), 0.0, r)
    with np.errstate(divide="ignore", invalid="ignore"):
        rlogr = np.where(r > 0, r * np.log(np.where(r > 0, r, 1.0)), 0.0)
        alog = np.where(a > 0, a * np.log(np.where(a > 0, a, 1.0)), 0.0)
        val = xh * np.log(b) - alog + rlogr + xh
    out[hyp] = np.where(r >= 0, val, np.inf)
    return out


def half_lnq(kind, p0, p1, x):
    jump, hyp = _split(kind)
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, np.nan)
    # left limit at the end of a jump
    out[jump] = np.where(x[jump] <= p0[jump] * CAP, np.log(p1[jump]), np.inf)
    r = p0[hyp] - x[hyp]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[hyp] = np.where(r > 0, np.log(p1[hyp]) - np.log(np.where(r > 0, r, 1.0)), np.inf)
    return out


def convex_terms(kind, p0, p1, pa, pb, y):
    """Per-half objective pa*(phi(rho) + negg(x)) and its partials in
    (pa, pb, y), with rho = pa/pb and x = y/pa."""
    pa = np.asarray(pa, dtype=float)
    pb = np.asarray(pb, dtype=float)
    y = np.asarray(y, dtype=float)
    rho = pa / pb
    x = y / pa
    phi = half_phi(kind, p0, p1, rho)
    d = half_sold(kind, p0, p1, rho)
    ng = half_negg(kind, p0, p1, x)
    lq = half_lnq(kind, p0, p1, x)
    with np.errstate(invalid="ignore"):
        xlq = np.where(x > 0, x * lq, 0.0)
        obj = pa * (phi + ng)
        d_pa = phi + d + ng - xlq
    d_pb = -rho * d
    return obj, d_pa, d_pb, lq


def excess_grid(kind, p0, p1, side, grid):
    """Excess demand for asset 0 at each rate in ``grid`` (asset-1 per
    asset-0). side 0 halves sell asset 0, side 1 halves sell asset 1."""
    grid = np.asarray(grid, dtype=float)
    out = np.zeros(grid.shape)
    inv = 1.0 / grid
    for k, s, a, b in zip(np.asarray(kind), np.asarray(side), np.asarray(p0), np.asarray(p1)):
        if k not in (0, 1):
            continue
        z = grid if s == 0 else inv
        if k == 0:
            dz = np.where(z > b, a, 0.0)
        else:
            dz = np.where(a * z > b, a - b / z, 0.0)
        out += -dz if s == 0 else dz * inv
    return out
