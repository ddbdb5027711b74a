"""Clearing equations over a set of bound halves, solved by semismooth Newton.

Unknowns are log-prices u and, for every jump half (limit sell offers,
constant-sum sides), a fill coordinate s with fill = size * clip(s, 0, 1).
The jump's complementarity condition is written as one piecewise-linear
equation

    ln rho - ln r = s - clip(s, 0, 1)

so s in (0, 1) pins the rate to the limit with a partial fill, s <= 0 keeps
the order out (rho <= r) and s >= 1 fills it (rho >= r). Together with
per-asset clearing this is a square, semismooth system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from . import kernels
from .density import GENERIC, BoundHalf, FunctionHalf, table_half


@dataclass
class NewtonResult:
    prices: np.ndarray
    amounts: np.ndarray  # per half, units of its sell asset
    s: np.ndarray  # jump coordinates, aligned with HalfSystem.jump_idx
    residual: float
    iterations: int
    converged: bool


class HalfSystem:
    def __init__(self, halves: list[BoundHalf], n_assets: int, scale: np.ndarray, fast_generic: bool = False):
        self.halves = halves
        self.n = n_assets
        self.scale = np.asarray(scale, dtype=float)
        self.sell = np.array([h.sell for h in halves], dtype=np.int64)
        self.buy = np.array([h.buy for h in halves], dtype=np.int64)
        kinds, p0, p1 = [], [], []
        self.generic: list[tuple[int, object]] = []
        for i, h in enumerate(halves):
            kp = h.density.kernel_params()
            if kp is None:
                dens = h.density
                if fast_generic and isinstance(dens, FunctionHalf):
                    dens = table_half(dens)
                self.generic.append((i, dens))
                kp = (GENERIC, 0.0, 0.0)
            kinds.append(kp[0])
            p0.append(kp[1])
            p1.append(kp[2])
        self.kind = np.array(kinds, dtype=np.int64)
        self.p0 = np.array(p0, dtype=float)
        self.p1 = np.array(p1, dtype=float)
        self.total = np.array([h.density.total for h in halves], dtype=float)
        self.jump_idx = np.nonzero(self.kind == 0)[0]
        self.smooth_idx = np.nonzero(self.kind != 0)[0]
        self.components = self._components()

    def _components(self) -> list[list[int]]:
        parent = list(range(self.n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for a, b in zip(self.sell, self.buy):
            ra, rb = find(int(a)), find(int(b))
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        groups: dict[int, list[int]] = {}
        for j in range(self.n):
            groups.setdefault(find(j), []).append(j)
        return list(groups.values())

    def normalize(self, p: np.ndarray) -> np.ndarray:
        """Scale each connected component so its smallest price is 1."""
        p = np.asarray(p, dtype=float).copy()
        for comp in self.components:
            p[comp] = p[comp] / p[comp].min()
        return p

    # densities

    def sold(self, rho: np.ndarray) -> np.ndarray:
        """D_i(rho_i), left-continuous at jumps."""
        out = kernels.half_sold(self.kind, self.p0, self.p1, rho)
        for i, h in self.generic:
            out[i] = float(h.sold(rho[i]))
        return out

    def sold_slope(self, rho: np.ndarray) -> np.ndarray:
        """D_i'(rho_i); zero on jumps and below the spot."""
        out = np.zeros(rho.size)
        hyp = self.kind == 1
        r = rho[hyp]
        out[hyp] = np.where(self.p0[hyp] * r > self.p1[hyp], self.p1[hyp] / r**2, 0.0)
        for i, h in self.generic:
            out[i] = float(h.derivative(rho[i]))
        return out

    def rates(self, p: np.ndarray) -> np.ndarray:
        return p[self.sell] / p[self.buy]

    def excess(self, p: np.ndarray, amounts: np.ndarray) -> np.ndarray:
        """Per-asset (bought - sold) / scale for given per-half amounts."""
        rho = self.rates(p)
        z = np.zeros(self.n)
        np.add.at(z, self.sell, -amounts)
        np.add.at(z, self.buy, amounts * rho)
        return z / self.scale

    def initial_s(self, p: np.ndarray, amounts: np.ndarray | None = None) -> np.ndarray:
        j = self.jump_idx
        lr = np.log(self.rates(p)[j] / self.p1[j])
        if amounts is None:
            frac = np.where(lr > 0, 1.0, 0.0)
        else:
            frac = np.clip(amounts[j] / np.where(self.p0[j] > 0, self.p0[j], 1.0), 0.0, 1.0)
        return frac + lr

    def _amounts(self, rho, s):
        x = self.sold(rho)
        j = self.jump_idx
        x[j] = self.p0[j] * np.clip(s, 0.0, 1.0)
        return x

    def smooth_residual(self, u: np.ndarray, mu: float, jac: bool = True):
        """Clearing equations with every jump replaced by the logistic fill
        size * sigmoid(ln(rho/r) / mu); a smooth system in u alone."""
        n = self.n
        p = np.exp(u)
        rho = p[self.sell] / p[self.buy]
        x = self.sold(rho)
        j = self.jump_idx
        z = np.log(rho[j] / self.p1[j]) / mu
        sig = 0.5 * (1.0 + np.tanh(0.5 * z))
        x[j] = self.p0[j] * sig
        F = self.excess(p, x)
        roots = [c[0] for c in self.components]
        F[roots] = u[roots]
        if not jac:
            return F
        g = rho * self.sold_slope(rho)
        g[j] = self.p0[j] * sig * (1.0 - sig) / mu
        J = np.zeros((n, n))
        sa, sb = self.scale[self.sell], self.scale[self.buy]
        for i in range(len(self.halves)):
            a, b = self.sell[i], self.buy[i]
            J[a, a] -= g[i] / sa[i]
            J[a, b] += g[i] / sa[i]
            J[b, a] += rho[i] * (x[i] + g[i]) / sb[i]
            J[b, b] -= rho[i] * (x[i] + g[i]) / sb[i]
        J[roots, :] = 0.0
        J[roots, roots] = 1.0
        return F, J

    def smoothed_fills(self, p: np.ndarray, mu: float) -> np.ndarray:
        j = self.jump_idx
        z = np.log(self.rates(p)[j] / self.p1[j]) / mu
        return 0.5 * (1.0 + np.tanh(0.5 * z))

    def residual(self, u: np.ndarray, s: np.ndarray, jac: bool = True):
        n, m = self.n, self.jump_idx.size
        p = np.exp(u)
        rho = p[self.sell] / p[self.buy]
        x = self._amounts(rho, s)
        F = np.zeros(n + m)
        F[:n] = self.excess(p, x)
        j = self.jump_idx
        clip = np.clip(s, 0.0, 1.0)
        F[n:] = np.log(rho[j]) - np.log(self.p1[j]) - (s - clip)
        roots = [c[0] for c in self.components]
        F[roots] = u[roots]
        if not jac:
            return F
        J = np.zeros((n + m, n + m))
        g = rho * self.sold_slope(rho)  # dx/du_sell
        inside = ((s > 0) & (s < 1)).astype(float)
        dx_ds = self.p0[j] * inside
        sa, sb = self.scale[self.sell], self.scale[self.buy]
        for i in range(len(self.halves)):
            a, b = self.sell[i], self.buy[i]
            # sold side: -x/scale_a ; bought side: +x*rho/scale_b
            dxa, dxb = g[i], -g[i]
            J[a, a] -= dxa / sa[i]
            J[a, b] -= dxb / sa[i]
            J[b, a] += (rho[i] * x[i] + rho[i] * dxa) / sb[i]
            J[b, b] += (-rho[i] * x[i] + rho[i] * dxb) / sb[i]
        for k, i in enumerate(j):
            a, b = self.sell[i], self.buy[i]
            J[a, n + k] -= dx_ds[k] / sa[i]
            J[b, n + k] += rho[i] * dx_ds[k] / sb[i]
            J[n + k, a] += 1.0
            J[n + k, b] -= 1.0
            J[n + k, n + k] = -(1.0 - inside[k])
        J[roots, :] = 0.0
        J[roots, roots] = 1.0
        return F, J

    @staticmethod
    def _damped(fun, v, tol, max_iter):
        """Levenberg-Marquardt on 1/2 |F|^2. The damping falls off on success
        so the tail is plain (semismooth) Gauss-Newton."""
        F, J = fun(v, True)
        merit = 0.5 * float(F @ F)
        lam = 1e-3
        it = 0
        for it in range(1, max_iter + 1):
            if math.sqrt(2 * merit) <= tol:
                break
            g = J.T @ F
            H = J.T @ J
            while True:
                A = H + lam * (np.diag(np.diag(H)) + 1e-12 * np.eye(H.shape[0]))
                try:
                    step = np.linalg.solve(A, -g)
                except np.linalg.LinAlgError:
                    step = np.linalg.lstsq(A, -g, rcond=None)[0]
                big = np.max(np.abs(step), initial=0.0)
                if big > 2.0:
                    step *= 2.0 / big
                v2 = v + step
                F2 = fun(v2, False)
                m2 = 0.5 * float(F2 @ F2)
                if np.isfinite(m2) and m2 < merit:
                    lam = max(lam / 5.0, 1e-12)
                    break
                lam *= 4.0
                if lam > 1e12:
                    return v, math.sqrt(2 * merit), it
            v = v2
            F, J = fun(v, True)
            merit = 0.5 * float(F @ F)
        return v, math.sqrt(2 * merit), it

    def _seeds(self, u: np.ndarray, mu: float) -> list[np.ndarray]:
        """Candidate fill coordinates read off a smoothed solution."""
        j = self.jump_idx
        frac = self.smoothed_fills(np.exp(u), mu)
        lr = np.log(self.rates(np.exp(u))[j] / self.p1[j])
        out = []
        for cut in (1e-3, 1e-2, 0.1):
            out.append(np.where(frac > 1 - cut, 1.0 + np.maximum(lr, 0.0), np.where(frac < cut, np.minimum(lr, 0.0), frac)))
        out.append(frac + lr)
        out.append(np.where(lr > 0, 1.0 + lr, lr))
        return out

    def tighten(self, u: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Equilibria are not unique when idle halves are the only links
        between groups of assets; the groups can then slide against each
        other. Slide them to the smallest log-price spread that keeps every
        idle half at or below its spot, which keeps float error in check."""
        rho = self.rates(np.exp(u))
        x = self._amounts(rho, s)
        parent = list(range(self.n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        idle = x <= 0
        for i in np.nonzero(~idle)[0]:
            ra, rb = find(int(self.sell[i])), find(int(self.buy[i]))
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        groups = sorted({find(a) for a in range(self.n)})
        if len(groups) < 2:
            return u, s
        gi = {g: k for k, g in enumerate(groups)}
        grp = np.array([gi[find(a)] for a in range(self.n)])
        k = len(groups)
        # variables: offsets t_0..t_{k-1}, lo, hi ; minimize hi - lo
        c = np.zeros(k + 2)
        c[k], c[k + 1] = -1.0, 1.0
        rows, rhs = [], []
        for i in np.nonzero(idle)[0]:
            a, b = int(self.sell[i]), int(self.buy[i])
            if grp[a] == grp[b]:
                continue
            row = np.zeros(k + 2)
            row[grp[a]] += 1.0
            row[grp[b]] -= 1.0
            rows.append(row)
            rhs.append(math.log(self.halves[i].density.spot) - (u[a] - u[b]))
        for a in range(self.n):
            row = np.zeros(k + 2)
            row[grp[a]], row[k] = -1.0, 1.0
            rows.append(row)
            rhs.append(u[a])
            row = np.zeros(k + 2)
            row[grp[a]], row[k + 1] = 1.0, -1.0
            rows.append(row)
            rhs.append(-u[a])
        bounds = [(None, None)] * (k + 2)
        bounds[0] = (0.0, 0.0)
        res = linprog(c, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=bounds, method="highs")
        if res.status != 0:
            return u, s
        u2 = u + res.x[grp]
        for comp in self.components:
            u2[comp] -= u2[comp[0]]
        j = self.jump_idx
        lr = np.log(self.rates(np.exp(u2))[j] / self.p1[j])
        s2 = np.where(x[j] <= 0, np.minimum(lr, 0.0), s)
        return u2, s2

    def newton(
        self,
        p0: np.ndarray,
        s0: np.ndarray | None = None,
        tol: float = 1e-14,
        max_iter: int = 200,
        mus=(1.0, 0.3, 0.1, 0.03, 0.01, 1e-3, 1e-4),
    ) -> NewtonResult:
        """Solve the clearing equations from prices ``p0``.

        Unless ``s0`` is given, jumps are first smoothed and the width mu is
        driven down with warm starts; the exact semismooth system is solved
        last, starting from the smoothed fills.
        """
        u = np.log(np.asarray(p0, dtype=float))
        for comp in self.components:
            u[comp] -= u[comp[0]]
        n = self.n
        iters = 0
        fun = lambda v, jac: self.residual(v[:n], v[n:], jac)  # noqa: E731
        best = None

        def attempt(u, seeds):
            nonlocal best, iters
            for seed in seeds:
                v, res, it = self._damped(fun, np.concatenate([u, seed]), tol, max_iter)
                iters += it
                if best is None or res < best[1]:
                    best = (v, res)
                if res <= max(tol, 1e-11):
                    return True
            return False

        if s0 is not None:
            attempt(u, [np.asarray(s0, dtype=float)])
        elif not self.jump_idx.size:
            attempt(u, [np.zeros(0)])
        else:
            for mu in mus:
                smooth = lambda v, jac, mu=mu: self.smooth_residual(v, mu, jac)  # noqa: E731
                u, _, it = self._damped(smooth, u, 1e-13, max_iter)
                iters += it
                # a small width flattens the logistic; only seed from the tail
                if mu <= 0.01 and attempt(u, self._seeds(u, mu)):
                    break
        v, res = best
        u, s = v[:n], v[n:]
        if res <= max(tol, 1e-11):
            u2, s2 = self.tighten(u, s)
            res2 = float(np.linalg.norm(self.residual(u2, s2, False)))
            if res2 <= max(tol, 1e-11, res):
                u, s = u2, s2
        p = self.normalize(np.exp(u))
        x = self._amounts(self.rates(p), s)
        return NewtonResult(p, x, s, res, iters, res <= max(tol, 1e-11))
