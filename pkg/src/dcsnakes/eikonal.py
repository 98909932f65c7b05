"""Iterative (Jacobi) solver for the sub-Riemannian and sub-Finslerian eikonal PDE.

Solves  F*(p, dW(p)) = 1,  W(source) = 0  with

    F*(p, dW) = C(p)^-1 sqrt(xi^-2 (A1 W)^2 + (A3 W)^2)       (F0)
    F*(p, dW) = C(p)^-1 sqrt(xi^-2 ((A1 W)+)^2 + (A3 W)^2)    (F0+)

by pseudo-time relaxation W <- W + eps (1 - F*(p, dW)).  A1 W uses values
interpolated at p -/+ (cos t, sin t) on the same orientation layer; A3 W uses
periodic neighbours.  Both are upwinded Rouy-Tourin style.  For the forward
model only the backward difference along A1 can carry information, which is
the monotone discretisation of (A1 W)+.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ConfigError, NonConvergenceError
from .grid import GridSpec, interpolate

INF = np.inf


@numba.njit(cache=True, inline="always")
def _bilinear(Wk, x, y, nx, ny):
    if x < 0.0 or y < 0.0 or x > nx - 1 or y > ny - 1:
        return INF
    i0 = int(math.floor(x))
    j0 = int(math.floor(y))
    if i0 > nx - 2:
        i0 = nx - 2
    if j0 > ny - 2:
        j0 = ny - 2
    fx = x - i0
    fy = y - j0
    v = 0.0
    # skip zero-weight corners so an unreached corner does not poison the sample
    for di in range(2):
        wx = fx if di else 1.0 - fx
        if wx == 0.0:
            continue
        for dj in range(2):
            wy = fy if dj else 1.0 - fy
            if wy == 0.0:
                continue
            v += wx * wy * Wk[i0 + di, j0 + dj]
    return v


@numba.njit(cache=True)
def _jacobi_step(W, Wn, C, E, cs, sn, inv_xi, dth, forward, si, sj, sk):
    nx, ny, nt = W.shape
    inv_dth = 1.0 / dth
    change = 0.0
    wmax = 0.0
    n_inf = 0
    for k in range(nt):
        c = cs[k]
        s = sn[k]
        km = (k - 1) % nt
        kp = (k + 1) % nt
        Wk = W[:, :, k]
        for i in range(nx):
            for j in range(ny):
                if i == si and j == sj and k == sk:
                    Wn[i, j, k] = 0.0
                    continue
                w = W[i, j, k]
                back = _bilinear(Wk, i - c, j - s, nx, ny)
                wt_m = W[i, j, km]
                wt_p = W[i, j, kp]
                if w == INF:
                    fwd = _bilinear(Wk, i + c, j + s, nx, ny)
                    cij = C[i, j, k]
                    cand = back + cij / inv_xi
                    if not forward:
                        cand = min(cand, fwd + cij / inv_xi)
                    cand = min(cand, min(wt_m, wt_p) + cij * dth)
                    Wn[i, j, k] = cand
                    if cand == INF:
                        n_inf += 1
                    else:
                        change = INF
                    continue
                a1 = w - back
                if not forward:
                    fwd = _bilinear(Wk, i + c, j + s, nx, ny)
                    a1 = max(a1, w - fwd)
                if a1 < 0.0:
                    a1 = 0.0
                a3 = max(w - wt_m, w - wt_p) * inv_dth
                if a3 < 0.0:
                    a3 = 0.0
                cij = C[i, j, k]
                h = math.sqrt((a1 * inv_xi) ** 2 + a3 * a3) / cij
                e = E[i, j, k]
                wn = w + e * (1.0 - h)
                if wn < 0.0:
                    wn = 0.0
                Wn[i, j, k] = wn
                d = abs(wn - w)
                if d > change:
                    change = d
                if wn > wmax:
                    wmax = wn
    return change, wmax, n_inf


@dataclass
class EikonalResult:
    W: np.ndarray
    grid: GridSpec
    source: tuple
    source_index: tuple
    xi: float
    forward: bool
    cost: np.ndarray
    iterations: int
    history: list = field(default_factory=list)

    def value(self, p) -> float:
        """Distance at a continuous point (trilinear)."""
        return float(interpolate(self.W, np.asarray(p, dtype=float)[None, :])[0])


def default_step(grid: GridSpec, xi: float, delta: float, cfl: float = 0.5) -> float:
    return cfl * min(grid.dx * xi, grid.dtheta) * delta


def solve_eikonal(cost, source, xi: float, forward: bool = False, grid: GridSpec | None = None,
                  tol: float = 1e-5, max_iters: int | None = None, cfl: float = 0.5,
                  local_step: bool = True) -> EikonalResult:
    """Distance map W(p) = d(source, p) for the F0 (or F0+) model.

    Args:
        cost: array of shape (nx, ny, ntheta) with values in (0, 1], or a
            scalar together with ``grid``.
        source: continuous (x, y, theta); the nearest node is pinned to 0.
        xi: stiffness parameter, in units of 1/pixel.
        forward: use F0+ (no reverse gear) instead of F0.
        tol: stop once max |dW| / max W falls below this.
        max_iters: iteration cap; defaults to 10 (nx + ny + ntheta) / (eps delta).
        cfl: fraction of the stability bound used for the pseudo-time step.
        local_step: scale the pseudo-time step by C(p) / delta.  This only
            changes the path to the fixed point, not the fixed point itself.
    """
    if xi <= 0:
        raise ConfigError(f"xi must be positive, got {xi}")
    if np.isscalar(cost):
        if grid is None:
            raise ConfigError("scalar cost needs an explicit grid")
        C = np.full(grid.shape, float(cost))
    else:
        C = np.asarray(cost, dtype=float)
        grid = grid or GridSpec(*C.shape)
    if C.shape != grid.shape:
        raise ConfigError(f"cost shape {C.shape} != grid {grid.shape}")
    if np.any(~(C > 0)) or np.any(C > 1 + 1e-12):
        raise ConfigError("cost must lie in (0, 1]")
    if not 0 < cfl <= 0.5:
        raise ConfigError(f"cfl must be in (0, 0.5], got {cfl}")
    si, sj, sk = grid.index_of(source)
    delta = float(C.min())
    eps = default_step(grid, xi, delta, cfl)
    if max_iters is None:
        max_iters = int(10 * (grid.nx + grid.ny + grid.ntheta) / (eps * delta)) + 1
    # local stepping multiplies the unit-cost step by C(p); CFL holds voxelwise
    E = (eps / delta) * C if local_step else np.full(grid.shape, eps)

    W = np.full(grid.shape, np.inf)
    W[si, sj, sk] = 0.0
    Wn = W.copy()
    th = grid.thetas
    cs, sn = np.cos(th), np.sin(th)
    # snap tiny trig values so axis-aligned layers sample exact nodes
    cs[np.abs(cs) < 1e-12] = 0.0
    sn[np.abs(sn) < 1e-12] = 0.0
    history: list[float] = []
    for it in range(1, max_iters + 1):
        change, wmax, n_inf = _jacobi_step(W, Wn, C, E, cs, sn, 1.0 / xi, grid.dtheta, forward, si, sj, sk)
        W, Wn = Wn, W
        rel = change / wmax if wmax > 0 else np.inf
        history.append(float(rel))
        if rel <= tol and n_inf == 0:
            return EikonalResult(W, grid, tuple(float(v) for v in source), (si, sj, sk), float(xi), bool(forward),
                                 C, it, history)
    raise NonConvergenceError(f"eikonal solver did not converge in {max_iters} iterations "
                              f"(last relative change {history[-1]:.3g})", history)


@numba.njit(cache=True)
def _upwind_gradient(W, cs, sn, dth, forward, a1, a3):
    nx, ny, nt = W.shape
    for k in range(nt):
        c = cs[k]
        s = sn[k]
        km = (k - 1) % nt
        kp = (k + 1) % nt
        Wk = W[:, :, k]
        for i in range(nx):
            for j in range(ny):
                w = W[i, j, k]
                dm = w - _bilinear(Wk, i - c, j - s, nx, ny)
                dp = w - _bilinear(Wk, i + c, j + s, nx, ny)
                g1 = 0.0
                if forward:
                    if dm > 0.0:
                        g1 = dm
                elif dm >= dp and dm > 0.0:
                    g1 = dm
                elif dp > 0.0:
                    g1 = -dp
                a1[i, j, k] = g1
                tm = w - W[i, j, km]
                tp = w - W[i, j, kp]
                g3 = 0.0
                if tm >= tp and tm > 0.0:
                    g3 = tm / dth
                elif tp > 0.0:
                    g3 = -tp / dth
                a3[i, j, k] = g3


def upwind_gradient(res: EikonalResult):
    """Frame derivatives (A1 W, A3 W) with the solver's upwind choice.

    Each derivative points towards the neighbour that carried the value, so
    descent along them always heads downhill.  Cached on the result.
    """
    cached = getattr(res, "_grad", None)
    if cached is not None:
        return cached
    th = res.grid.thetas
    cs, sn = np.cos(th), np.sin(th)
    cs[np.abs(cs) < 1e-12] = 0.0
    sn[np.abs(sn) < 1e-12] = 0.0
    a1 = np.zeros_like(res.W)
    a3 = np.zeros_like(res.W)
    _upwind_gradient(res.W, cs, sn, res.grid.dtheta, res.forward, a1, a3)
    res._grad = (a1, a3)
    return a1, a3


def residual(res: EikonalResult) -> np.ndarray:
    """|F*(p, dW) - 1| with the upwind derivatives; NaN at the source node."""
    from .geometry import dual_finsler

    a1, a3 = upwind_gradient(res)
    r = np.abs(dual_finsler(a1, a3, res.xi, res.cost, res.forward) - 1.0)
    r[res.source_index] = np.nan
    return r
