"""Left-invariant geometry of SE(2) = R^2 x S^1.

Frame: A1 = (cos t, sin t, 0), A2 = (-sin t, cos t, 0), A3 = (0, 0, 1).
Tangent vectors are written in frame components (u1, u3) for horizontal
curves, and covectors as (p1, p3).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import ConfigError
from .grid import GridSpec, wrap_signed

DEFAULT_METRIC = (0.2, 1.0, 7.0)


def frame(theta):
    """Return A1, A2, A3 at orientation(s) theta as arrays of shape (..., 3)."""
    th = np.asarray(theta, dtype=float)
    c, s, z = np.cos(th), np.sin(th), np.zeros_like(th)
    a1 = np.stack([c, s, z], axis=-1)
    a2 = np.stack([-s, c, z], axis=-1)
    a3 = np.stack([z, z, np.ones_like(th)], axis=-1)
    return a1, a2, a3


def to_frame(theta, v):
    """Components (w1, w2, w3) of a Euclidean vector v = (dx, dy, dtheta) in the frame."""
    v = np.asarray(v, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    w1 = c * v[..., 0] + s * v[..., 1]
    w2 = -s * v[..., 0] + c * v[..., 1]
    return np.stack([w1, w2, v[..., 2]], axis=-1)


def finsler(u1, u3, xi: float, cost=1.0, forward: bool = False):
    """F0 (or F0+ when forward) of the horizontal vector u1 A1 + u3 A3."""
    u1 = np.asarray(u1, dtype=float)
    val = np.asarray(cost, dtype=float) * np.sqrt(xi**2 * u1**2 + np.asarray(u3, dtype=float) ** 2)
    if forward:
        val = np.where(u1 < 0, np.inf, val)
    return val


def dual_finsler(p1, p3, xi: float, cost=1.0, forward: bool = False):
    """Dual norm: C^-1 sqrt(xi^-2 p1^2 + p3^2), with p1 -> (p1)+ for F0+."""
    p1 = np.asarray(p1, dtype=float)
    if forward:
        p1 = np.maximum(p1, 0.0)
    return np.sqrt(p1**2 / xi**2 + np.asarray(p3, dtype=float) ** 2) / np.asarray(cost, dtype=float)


# -- Riemannian ball kernel ---------------------------------------------------

def log_coordinates(x, y, theta):
    """Exponential coordinates (c1, c2, c3) of the group element (x, y, theta).

    c3 is theta wrapped to (-pi, pi]; (c1, c2) = A(c3)^-1 (x, y) with
    A(t) = (sin t / t) I + ((1 - cos t) / t) J, which tends to I as t -> 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t = wrap_signed(theta)
    small = np.abs(t) < 1e-8
    ts = np.where(small, 1.0, t)
    a = np.where(small, 1.0 - t**2 / 6.0, np.sin(ts) / ts)
    b = np.where(small, t / 2.0, (1.0 - np.cos(ts)) / ts)
    # A = [[a, -b], [b, a]], inverse = [[a, b], [-b, a]] / (a^2 + b^2)
    det = a * a + b * b
    c1 = (a * x + b * y) / det
    c2 = (-b * x + a * y) / det
    return c1, c2, t


def rho(x, y, theta, g=DEFAULT_METRIC):
    """Approximate left-invariant Riemannian distance from the identity."""
    c1, c2, c3 = log_coordinates(x, y, theta)
    return np.sqrt(g[0] * c1**2 + g[1] * c2**2 + g[2] * c3**2)


def ball_kernel(x, y, theta, g=DEFAULT_METRIC, radius: float = 1.0):
    """Morphological kernel: 0 inside the unit ball, +inf outside."""
    return np.where(rho(x, y, theta, g) <= radius, 0.0, np.inf)


@lru_cache(maxsize=32)
def _stencil_cached(ntheta: int, g: tuple, radius: float):
    dth = 2 * np.pi / ntheta
    # bounding box from the metric: |c1| <= r/sqrt(g11) etc, padded for rotation
    rs = int(np.ceil(radius / np.sqrt(min(g[0], g[1])))) + 1
    rk = int(np.ceil(radius / np.sqrt(g[2]) / dth))
    ii, jj, kk = np.meshgrid(np.arange(-rs, rs + 1), np.arange(-rs, rs + 1), np.arange(-rk, rk + 1), indexing="ij")
    ii, jj, kk = ii.ravel(), jj.ravel(), kk.ravel()
    layers = []
    for k in range(ntheta):
        th = k * dth
        c, s = np.cos(th), np.sin(th)
        # local-frame displacement of the offset seen from a node at orientation th
        lx = c * ii + s * jj
        ly = -s * ii + c * jj
        inside = rho(lx, ly, kk * dth, g) <= radius
        layers.append(np.stack([ii[inside], jj[inside], kk[inside]], axis=1))
    return tuple(layers)


def stencil_offsets(ntheta: int, g=DEFAULT_METRIC, radius: float = 1.0):
    """Per-layer integer offsets (di, dj, dk) of grid nodes inside the translated ball.

    A node q is a neighbour of p (at layer k) iff rho(p^-1 q) <= radius, so
    the offset set depends on the orientation of p.
    """
    if len(g) != 3 or min(g) <= 0:
        raise ConfigError(f"metric weights must be three positive numbers, got {g}")
    return _stencil_cached(int(ntheta), tuple(float(v) for v in g), float(radius))


def _slices(d, n):
    """(destination, source) slices for a shift by d along an axis of length n."""
    return slice(max(0, -d), min(n, n - d)), slice(max(0, d), min(n, n + d))


def dilate(values: np.ndarray, g=DEFAULT_METRIC, radius: float = 1.0, projective: bool = False) -> np.ndarray:
    """Max over the group-translated zero set of the ball kernel.

    out(p) = max { f(q) : rho(p^-1 q) <= radius }.  Outside the spatial
    domain the field counts as -inf (False for boolean fields).  With
    ``projective`` the array holds only the orientations in [0, pi) and the
    angular axis wraps after ntheta layers; the stencils are those of the
    full circle grid with 2 * ntheta layers, which repeat after pi.
    """
    nx, ny, nt = values.shape
    offs = stencil_offsets(2 * nt if projective else nt, g, radius)
    fill = False if values.dtype == bool else -np.inf
    out = np.full_like(values, fill)
    for k in range(nt):
        layer_out = out[:, :, k]
        for di, dj, dk in offs[k]:
            xd, xs = _slices(int(di), nx)
            yd, ys = _slices(int(dj), ny)
            src = values[xs, ys, (k + dk) % nt]
            dst = layer_out[xd, yd]
            np.maximum(dst, src, out=dst)
    return out


def erode(values: np.ndarray, g=DEFAULT_METRIC, radius: float = 1.0, projective: bool = False) -> np.ndarray:
    """Min over the translated ball; the dual of dilate."""
    if values.dtype == bool:
        return ~dilate(~values, g, radius, projective)
    return -dilate(-values, g, radius, projective)
