"""Geodesic tracking for the projective line-bundle distances.

Two models relate the unoriented line elements [p0] and [p1]:

* ``dc``: minimum over the four F0+ instances (p0|p0bar) -> (p1|p1bar).  Its
  minimizers never have cusps.
* ``dproj``: minimum of d_F0(p0, p1) and d_F0(p0, p1bar).  Its minimizers may
  have cusps, which are reported.

Geodesics are recovered by descending the distance map with RK4 on

    gamma' = -C^-2 (xi^-2 (A1 W)[+] A1 + (A3 W) A3),

which has unit Finsler speed, so the parameter equals the distance travelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .eikonal import EikonalResult, solve_eikonal, upwind_gradient
from .errors import BacktrackingError, DomainError
from .grid import TWO_PI, GridSpec, antipode, wrap_angle


@dataclass
class Curve:
    """A sampled curve in R^2 x S^1, ordered from source to target."""

    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray

    def __len__(self):
        return len(self.x)

    @property
    def points(self) -> np.ndarray:
        return np.stack([self.x, self.y, self.theta], axis=1)

    @classmethod
    def from_points(cls, pts) -> "Curve":
        pts = np.asarray(pts, dtype=float).reshape(-1, 3)
        return cls(pts[:, 0].copy(), pts[:, 1].copy(), wrap_angle(pts[:, 2]))

    def reversed(self) -> "Curve":
        return Curve(self.x[::-1].copy(), self.y[::-1].copy(), self.theta[::-1].copy())


@dataclass
class TrackResult:
    distance: float
    curve: Curve | None
    model: str
    instance: tuple = (False, False)
    instances: dict = field(default_factory=dict)
    maxwell: bool = False
    cusps: list = field(default_factory=list)


# -- controls and cusps -------------------------------------------------------

def controls(curve: Curve):
    """Frame controls (u1, u3) per sample, from central differences.

    Orientation is unwrapped before differencing.  Units are per sample step.
    """
    n = len(curve)
    if n < 2:
        return np.zeros(n), np.zeros(n)
    th = np.unwrap(curve.theta)
    dx = np.gradient(curve.x)
    dy = np.gradient(curve.y)
    dth = np.gradient(th)
    u1 = np.cos(curve.theta) * dx + np.sin(curve.theta) * dy
    return u1, dth


def detect_cusps(curve: Curve, rel_tol: float = 0.05, window: int = 3) -> list[int]:
    """Sample indices where u1 changes sign.

    A change counts when at least ``window`` consecutive samples on each side
    have |u1| above ``rel_tol * max|u1|``; samples below that are ignored so
    in-place rotations and noise do not register.
    """
    u1, _ = controls(curve)
    if len(u1) == 0:
        return []
    m = np.max(np.abs(u1))
    if m == 0:
        return []
    sgn = np.where(u1 > rel_tol * m, 1, np.where(u1 < -rel_tol * m, -1, 0))
    # runs of equal nonzero sign
    runs = []
    i = 0
    while i < len(sgn):
        if sgn[i] == 0:
            i += 1
            continue
        j = i
        while j + 1 < len(sgn) and sgn[j + 1] == sgn[i]:
            j += 1
        runs.append((sgn[i], i, j))
        i = j + 1
    cusps = []
    prev = None
    for r in runs:
        if r[2] - r[1] + 1 < window:
            continue
        if prev is not None and prev[0] != r[0]:
            cusps.append((prev[2] + r[1]) // 2)
        prev = r
    return cusps


# -- backtracking -------------------------------------------------------------

def frame_gradient(W: np.ndarray):
    """A1 W and A3 W on the grid by central differences."""
    nt = W.shape[2]
    th = np.arange(nt) * 2 * np.pi / nt
    gx = np.gradient(W, axis=0)
    gy = np.gradient(W, axis=1)
    a1 = np.cos(th) * gx + np.sin(th) * gy
    a3 = (np.roll(W, -1, axis=2) - np.roll(W, 1, axis=2)) / (2 * (2 * np.pi / nt))
    return a1, a3


@numba.njit(cache=True)
def _trilinear(F, x, y, t, dth):
    nx, ny, nt = F.shape
    x = min(max(x, 0.0), nx - 1.0)
    y = min(max(y, 0.0), ny - 1.0)
    i0 = min(int(math.floor(x)), nx - 2)
    j0 = min(int(math.floor(y)), ny - 2)
    s = (t % TWO_PI) / dth
    k0 = int(math.floor(s))
    ft = s - k0
    k0 = k0 % nt
    k1 = (k0 + 1) % nt
    fx = x - i0
    fy = y - j0
    v = 0.0
    for di in range(2):
        wx = fx if di else 1.0 - fx
        for dj in range(2):
            wy = fy if dj else 1.0 - fy
            v += wx * wy * ((1.0 - ft) * F[i0 + di, j0 + dj, k0] + ft * F[i0 + di, j0 + dj, k1])
    return v


@numba.njit(cache=True)
def _vel(a1f, a3f, cf, x, y, t, dth, xi, forward):
    a1 = _trilinear(a1f, x, y, t, dth)
    a3 = _trilinear(a3f, x, y, t, dth)
    c = _trilinear(cf, x, y, t, dth)
    if forward and a1 < 0.0:
        a1 = 0.0
    u1 = -a1 / (xi * xi * c * c)
    u3 = -a3 / (c * c)
    return u1 * math.cos(t), u1 * math.sin(t), u3


@numba.njit(cache=True)
def _wrapped(d):
    d = (d + math.pi) % TWO_PI - math.pi
    return d


@numba.njit(cache=True)
def _trace(a1f, a3f, cf, p, src, dth, xi, forward, h, stop_radius, max_steps, stall_tol, stall_steps):
    nx, ny, nt = a1f.shape
    out = np.empty((max_steps + 1, 3))
    x, y, t = p[0], p[1], p[2] % TWO_PI
    out[0, 0], out[0, 1], out[0, 2] = x, y, t
    n = 1
    stalled = 0
    for _ in range(max_steps):
        dist = math.sqrt((x - src[0]) ** 2 + (y - src[1]) ** 2 + (_wrapped(t - src[2]) / dth) ** 2)
        if dist <= stop_radius:
            return out[:n], 0
        k1x, k1y, k1t = _vel(a1f, a3f, cf, x, y, t, dth, xi, forward)
        speed = max(math.sqrt(k1x * k1x + k1y * k1y), abs(k1t) / dth)
        if speed < 1e-12:
            return out[:n], 1
        dt = h / speed
        k2x, k2y, k2t = _vel(a1f, a3f, cf, x + 0.5 * dt * k1x, y + 0.5 * dt * k1y, t + 0.5 * dt * k1t, dth, xi, forward)
        k3x, k3y, k3t = _vel(a1f, a3f, cf, x + 0.5 * dt * k2x, y + 0.5 * dt * k2y, t + 0.5 * dt * k2t, dth, xi, forward)
        k4x, k4y, k4t = _vel(a1f, a3f, cf, x + dt * k3x, y + dt * k3y, t + dt * k3t, dth, xi, forward)
        nxp = min(max(x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x), 0.0), nx - 1.0)
        nyp = min(max(y + dt / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y), 0.0), ny - 1.0)
        ntp = (t + dt / 6.0 * (k1t + 2 * k2t + 2 * k3t + k4t)) % TWO_PI
        disp = math.sqrt((nxp - x) ** 2 + (nyp - y) ** 2 + (_wrapped(ntp - t) / dth) ** 2)
        if disp < stall_tol:
            stalled += 1
            if stalled >= stall_steps:
                return out[:n], 2
        else:
            stalled = 0
        x, y, t = nxp, nyp, ntp
        out[n, 0], out[n, 1], out[n, 2] = x, y, t
        n += 1
    return out[:n], 3


def backtrack(res: EikonalResult, target, h: float = 0.25, stop_radius: float = 1.5,
              max_steps: int | None = None, stall_tol: float = 1e-4, stall_steps: int = 50) -> Curve:
    """Steepest descent from ``target`` to the source of a distance map.

    Steps are sized so each moves about ``h`` voxels (orientation measured in
    units of dtheta).  The spatial velocity is never normalised on its own,
    which keeps in-place rotations intact.  Returns the curve ordered from
    source to target, ending exactly at both.
    """
    grid = res.grid
    a1, a3 = upwind_gradient(res)
    src = np.array(grid.node(*res.source_index))
    p = np.array(target, dtype=float)
    if not grid.contains(p):
        raise DomainError(f"target {tuple(p)} outside grid")
    if max_steps is None:
        max_steps = int(2 * 2 * (grid.nx + grid.ny + grid.ntheta) / h)
    pts, status = _trace(a1, a3, res.cost, p, src, grid.dtheta, res.xi, res.forward, h, stop_radius,
                         max_steps, stall_tol, stall_steps)
    if status == 1:
        raise BacktrackingError(f"zero gradient at {tuple(pts[-1])}")
    if status == 2:
        raise BacktrackingError(f"backtracking stalled near {tuple(pts[-1])}")
    if status == 3:
        raise BacktrackingError(f"backtracking did not reach the source in {max_steps} steps")
    # close the gap to the exact source with samples at the same spacing
    last = pts[-1]
    d = src - last
    d[2] = (d[2] + np.pi) % TWO_PI - np.pi
    gap = np.sqrt(d[0] ** 2 + d[1] ** 2 + (d[2] / grid.dtheta) ** 2)
    m = max(1, int(np.ceil(gap / h)))
    tail = last[None, :] + np.linspace(0, 1, m + 1)[1:, None] * d[None, :]
    pts = np.vstack([pts, tail])
    return Curve.from_points(pts[::-1])


# -- distance models -----------------------------------------------------------

def _prepare(cost, grid):
    if np.isscalar(cost):
        if grid is None:
            raise DomainError("scalar cost needs a grid")
        return np.full(grid.shape, float(cost)), grid
    c = np.asarray(cost, dtype=float)
    return c, grid or GridSpec(*c.shape)


@dataclass
class DcMaps:
    """F0+ distance maps from p0 and from its antipode."""

    plus: EikonalResult
    minus: EikonalResult

    @property
    def source(self):
        return self.plus.source


def dc_maps(cost, p0, xi: float, grid: GridSpec | None = None, **solver_kw) -> DcMaps:
    C, grid = _prepare(cost, grid)
    p0 = np.asarray(p0, dtype=float)
    a = solve_eikonal(C, p0, xi, forward=True, grid=grid, **solver_kw)
    b = solve_eikonal(C, antipode(p0), xi, forward=True, grid=grid, **solver_kw)
    return DcMaps(a, b)


def dc_query(maps: DcMaps, p1, backtrack_curve: bool = True, tie_tol: float = 1e-3, **bt_kw) -> TrackResult:
    """Evaluate d_c([p0], [p1]) from precomputed maps."""
    p1 = np.asarray(p1, dtype=float)
    p1b = antipode(p1)
    vals = {}
    for q0, res in ((False, maps.plus), (True, maps.minus)):
        for q1, pt in ((False, p1), (True, p1b)):
            vals[(q0, q1)] = res.value(pt)
    order = sorted(vals, key=vals.get)
    best = order[0]
    d = vals[best]
    maxwell = bool(vals[order[1]] - d <= tie_tol * max(d, 1e-12))
    curve = None
    if backtrack_curve:
        res = maps.minus if best[0] else maps.plus
        curve = backtrack(res, p1b if best[1] else p1, **bt_kw)
    return TrackResult(float(d), curve, "dc", best, vals, maxwell)


def dproj_query(res: EikonalResult, p1, backtrack_curve: bool = True, tie_tol: float = 1e-3,
                **bt_kw) -> TrackResult:
    """Evaluate d_proj([p0], [p1]) from a single F0 map rooted at p0."""
    p1 = np.asarray(p1, dtype=float)
    p1b = antipode(p1)
    vals = {(False, False): res.value(p1), (False, True): res.value(p1b)}
    order = sorted(vals, key=vals.get)
    best = order[0]
    d = vals[best]
    maxwell = bool(vals[order[1]] - d <= tie_tol * max(d, 1e-12))
    curve, cusps = None, []
    if backtrack_curve:
        curve = backtrack(res, p1b if best[1] else p1, **bt_kw)
        cusps = detect_cusps(curve)
    return TrackResult(float(d), curve, "dproj", best, vals, maxwell, cusps)


def distance_dc(cost, p0, p1, xi: float, grid: GridSpec | None = None, backtrack_curve: bool = True,
                solver_kw: dict | None = None, **bt_kw) -> TrackResult:
    """Cusp-free projective distance d_c([p0], [p1]) and its minimizing geodesic."""
    maps = dc_maps(cost, p0, xi, grid, **(solver_kw or {}))
    out = dc_query(maps, p1, backtrack_curve, **bt_kw)
    if out.curve is not None:
        out.cusps = detect_cusps(out.curve)
    return out


def distance_proj(cost, p0, p1, xi: float, grid: GridSpec | None = None, backtrack_curve: bool = True,
                  solver_kw: dict | None = None, **bt_kw) -> TrackResult:
    """Projective distance d_proj([p0], [p1]) under the reversible model."""
    C, grid = _prepare(cost, grid)
    res = solve_eikonal(C, np.asarray(p0, dtype=float), xi, forward=False, grid=grid, **(solver_kw or {}))
    return dproj_query(res, p1, backtrack_curve, **bt_kw)


@dataclass
class Regime:
    in_cone: bool
    dc: float
    dproj: float
    consistent: bool | None
    cusps: list


def classify_regime(p1, dc: DcMaps | TrackResult, proj: EikonalResult | TrackResult, tol: float = 0.03) -> Regime:
    """Whether [p1] lies in the cusp-free cone of [p0], with a consistency check.

    Inside the cone the two distances should agree to relative ``tol``.
    """
    r_dc = dc if isinstance(dc, TrackResult) else dc_query(dc, p1, backtrack_curve=False)
    r_pr = proj if isinstance(proj, TrackResult) else dproj_query(proj, p1, backtrack_curve=True)
    inside = len(r_pr.cusps) == 0
    consistent = None
    if inside:
        consistent = bool(abs(r_dc.distance - r_pr.distance) <= tol * max(r_pr.distance, 1e-12))
    return Regime(inside, r_dc.distance, r_pr.distance, consistent, list(r_pr.cusps))
