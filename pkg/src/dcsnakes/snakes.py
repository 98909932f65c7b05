"""Initial contours, the horizontality switch, spatial snakes and geodesic completion.

A contour is a closed sampled curve in R^2 x S^1.  Where its orientation
agrees with its spatial tangent (it is nearly horizontal) the samples are
moved along the normal on their own orientation layer; the remaining gaps
are closed by geodesic tracking between the refined endpoints.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from skimage import measure

from .costfield import ComponentLabeling, GroupedCost, select_cost
from .errors import BacktrackingError, NonConvergenceError, UnclaimedPointError
from .grid import TWO_PI, GridSpec, wrap_angle, wrap_signed
from .tracking import Curve, dc_maps, dc_query, dproj_query
from .eikonal import solve_eikonal

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 3 * TWO_PI / 48


# -- closed-curve helpers -----------------------------------------------------

def _closed_gradient(a):
    return 0.5 * (np.roll(a, -1) - np.roll(a, 1))


def resample_closed(pts: np.ndarray, step: float = 1.0) -> np.ndarray:
    """Resample a closed polyline (first point not repeated) at uniform arclength."""
    pts = np.asarray(pts, dtype=float)
    loop = np.vstack([pts, pts[:1]])
    seg = np.linalg.norm(np.diff(loop[:, :2], axis=0), axis=1)
    s = np.concatenate([[0], np.cumsum(seg)])
    L = s[-1]
    if L == 0:
        return pts[:1].copy()
    n = max(int(np.round(L / step)), 3)
    t = np.arange(n) * L / n
    return np.stack([np.interp(t, s, loop[:, c]) for c in range(pts.shape[1])], axis=1)


def smooth_closed(a: np.ndarray, window: int = 5) -> np.ndarray:
    """Periodic moving average along the first axis."""
    if window <= 1:
        return np.asarray(a, dtype=float).copy()
    k = np.ones(window) / window
    return ndimage.convolve1d(np.asarray(a, dtype=float), k, axis=0, mode="wrap")


def smooth_axial(theta: np.ndarray, window: int = 5) -> np.ndarray:
    """Moving average of orientations mod pi, returned near the input representatives."""
    z = smooth_closed(np.stack([np.cos(2 * theta), np.sin(2 * theta)], 1), window)
    m = 0.5 * np.arctan2(z[:, 1], z[:, 0])
    # keep the representative (m or m + pi) closest to the input
    flip = np.abs(wrap_signed(theta - m)) > np.pi / 2
    return wrap_angle(m + np.pi * flip)


# -- initial contours ----------------------------------------------------------

@dataclass
class InitialContour:
    component: int
    curve: Curve


def initial_contours(labeling: ComponentLabeling, V: np.ndarray | None = None, step: float = 1.0,
                     window: int = 5, min_length: float = 8.0, all_loops: bool = False) -> list[InitialContour]:
    """Closed contours in R^2 x S^1 from the components.

    The spatial projection of each component is outlined at its morphological
    edge; every outline sample is lifted to the orientations the component
    occupies at that pixel (V-weighted axial mean), choosing the
    representative closest to the outline tangent.  Outlines are traversed
    counter-clockwise in (x, y).  Unless ``all_loops`` is set only the longest
    outline of each component is kept.
    """
    out = []
    lab = labeling.labels
    nx, ny, nt = lab.shape
    thetas = np.arange(nt) * TWO_PI / nt
    for i in range(1, labeling.n + 1):
        m3 = lab == i
        proj = ndimage.binary_fill_holes(m3.any(axis=2))
        if not proj.any():
            log.warning("component %d has an empty projection; skipped", i)
            continue
        # weights of the component's orientations per pixel
        w = np.where(m3, V if V is not None else 1.0, 0.0)
        c2 = (w * np.cos(2 * thetas)).sum(2)
        s2 = (w * np.sin(2 * thetas)).sum(2)
        # pixels just outside the mask borrow the orientation of the nearest inside pixel
        _, ind = ndimage.distance_transform_edt(~proj, return_indices=True)
        c2, s2 = c2[tuple(ind)], s2[tuple(ind)]
        padded = np.pad(proj.astype(float), 1)
        loops = []
        for cont in measure.find_contours(padded, 0.5):
            cont = cont - 1.0
            if not np.allclose(cont[0], cont[-1]):
                continue
            cont = cont[:-1]
            seg = np.linalg.norm(np.diff(np.vstack([cont, cont[:1]]), axis=0), axis=1).sum()
            if seg >= min_length:
                loops.append((seg, cont))
        loops.sort(key=lambda t: -t[0])
        for _, cont in (loops if all_loops else loops[:1]):
            # counter-clockwise in (x, y): positive signed area
            xs, ys = cont[:, 0], cont[:, 1]
            area = 0.5 * np.sum(xs * np.roll(ys, -1) - np.roll(xs, -1) * ys)
            if area < 0:
                cont = cont[::-1]
            pts = resample_closed(cont, step)
            pts = np.stack([smooth_closed(pts[:, 0], window), smooth_closed(pts[:, 1], window)], 1)
            ii = np.clip(np.round(pts[:, 0]).astype(int), 0, nx - 1)
            jj = np.clip(np.round(pts[:, 1]).astype(int), 0, ny - 1)
            th = 0.5 * np.arctan2(s2[ii, jj], c2[ii, jj])
            tang = np.arctan2(_closed_gradient(pts[:, 1]), _closed_gradient(pts[:, 0]))
            th = np.where(np.abs(wrap_signed(th - tang)) > np.pi / 2, th + np.pi, th)
            th = smooth_axial(wrap_angle(th), window)
            out.append(InitialContour(i, Curve(pts[:, 0].copy(), pts[:, 1].copy(), th)))
    return out


# -- switching criterion -------------------------------------------------------

def horizontality_deviation(curve: Curve, closed: bool = True) -> np.ndarray:
    """phi(t) = arccos(x' . n / |x'|) in [0, pi], n = (cos theta, sin theta)."""
    if closed:
        dx, dy = _closed_gradient(curve.x), _closed_gradient(curve.y)
    else:
        dx, dy = np.gradient(curve.x), np.gradient(curve.y)
    sp = np.hypot(dx, dy)
    dot = (dx * np.cos(curve.theta) + dy * np.sin(curve.theta)) / np.where(sp > 0, sp, 1.0)
    phi = np.arccos(np.clip(dot, -1.0, 1.0))
    return np.where(sp > 0, phi, np.pi / 2)


@dataclass
class ContourSegment:
    indices: np.ndarray         # positions in the parent loop, in traversal order
    mode: str                   # "spatial" or "geodesic"
    component: int = 0
    prev: int = -1
    next: int = -1


def split_by_horizontality(curve: Curve, alpha: float = DEFAULT_ALPHA, component: int = 0,
                           min_spatial: int = 1) -> list[ContourSegment]:
    """Cut a closed contour into maximal spatial (phi <= alpha) and geodesic runs.

    Spatial runs shorter than ``min_spatial`` samples are handed to the
    geodesic model.  Segments are returned in loop order with prev/next links;
    a closed loop always has an even number of mode switches.
    """
    n = len(curve)
    if n < 4:
        return [ContourSegment(np.arange(n), "geodesic", component, 0, 0)]
    flag = horizontality_deviation(curve) <= alpha
    if min_spatial > 1 and not flag.all():
        for s, e in _runs(flag):
            if flag[s] and (e - s) < min_spatial:
                flag[np.arange(s, e) % n] = False
    if flag.all() or not flag.any():
        mode = "spatial" if flag.all() else "geodesic"
        return [ContourSegment(np.arange(n), mode, component, 0, 0)]
    segs = []
    for s, e in _runs(flag):
        segs.append(ContourSegment(np.arange(s, e) % n, "spatial" if flag[s] else "geodesic", component))
    m = len(segs)
    for k, sg in enumerate(segs):
        sg.prev, sg.next = (k - 1) % m, (k + 1) % m
    return segs


def _runs(flag):
    """Cyclic runs of equal values as (start, stop) with stop possibly > n."""
    n = len(flag)
    change = np.flatnonzero(flag != np.roll(flag, 1))
    if len(change) == 0:
        return [(0, n)]
    return [(int(change[k]), int(change[(k + 1) % len(change)] + (n if k + 1 == len(change) else 0)))
            for k in range(len(change))]


def count_switches(segments: list[ContourSegment]) -> int:
    if len(segments) <= 1:
        return 0
    return sum(segments[k].mode != segments[(k + 1) % len(segments)].mode for k in range(len(segments)))


# -- spatial snakes -------------------------------------------------------------

class EdgeProfiler:
    """Gaussian gradient norms of Re U on single orientation layers, cached."""

    def __init__(self, U: np.ndarray, scales=(1.0, 2.0, 4.0), gamma: float = 0.5):
        self.U = U
        self.scales = tuple(sorted(scales))
        self.gamma = gamma
        self._cache = {}
        self.nt = U.shape[2]

    def layer(self, theta: float) -> int:
        return int(np.round(wrap_angle(theta) / (TWO_PI / self.nt))) % self.nt

    def norm(self, k: int, s: float) -> np.ndarray:
        key = (k, s)
        if key not in self._cache:
            F = np.real(self.U[:, :, k])
            gx = ndimage.gaussian_filter(F, s, order=(1, 0), mode="nearest")
            gy = ndimage.gaussian_filter(F, s, order=(0, 1), mode="nearest")
            self._cache[key] = np.hypot(gx, gy)
        return self._cache[key]

    def profile(self, k, s, x, y, nrm, lam):
        pts = np.array([x + lam * nrm[0], y + lam * nrm[1]])
        return ndimage.map_coordinates(self.norm(k, s), pts, order=1, mode="nearest") * s**self.gamma


def _local_maxima(p, rel: float = 0.0):
    idx = np.flatnonzero((p[1:-1] > p[:-2]) & (p[1:-1] >= p[2:])) + 1
    return idx[p[idx] >= rel * p.max()] if rel > 0 else idx


def _parabolic(p, i):
    a, b, c = p[i - 1], p[i], p[i + 1]
    den = a - 2 * b + c
    return 0.0 if den == 0 else float(np.clip(0.5 * (a - c) / den, -0.5, 0.5))


def locate_edge(profile_fn, lam: np.ndarray, scales, rel: float = 0.25) -> float | None:
    """Scan-line displacement of the edge closest to lambda = 0.

    The scale with the largest gamma-normalised response is selected, the
    maximum closest to 0 is taken there, then followed down to the finest
    scale (edge focusing) and refined by a parabola.  Maxima weaker than
    ``rel`` times the strongest response on the line count as noise.
    """
    profs = {s: profile_fn(s) for s in scales}
    s_sel = max(scales, key=lambda s: profs[s].max())
    h = lam[1] - lam[0]
    mx = _local_maxima(profs[s_sel], rel)
    if len(mx) == 0:
        return None
    i = int(mx[np.argmin(np.abs(lam[mx]))])
    for s in [s for s in scales if s < s_sel][::-1]:
        cand = _local_maxima(profs[s], rel)
        if len(cand) == 0:
            break
        j = int(cand[np.argmin(np.abs(cand - i))])
        if abs(j - i) * h > s_sel:
            break
        i = j
    s_fin = min([s for s in scales if s <= s_sel], default=s_sel)
    p = profs[s_fin]
    if not (0 < i < len(p) - 1):
        return float(lam[i])
    return float(lam[i] + _parabolic(p, i) * h)


def spatial_refine(curve: Curve, indices, profiler: EdgeProfiler, radius: float = 8.0,
                   step: float = 0.25) -> tuple[np.ndarray, np.ndarray]:
    """Move the given samples along their normals onto the nearest edge.

    Returns (new xy of shape (len(indices), 2), flags) where a flag marks a
    sample left in place because no maximum was found inside the scan range.
    """
    lam = np.arange(-radius, radius + step / 2, step)
    xy = np.zeros((len(indices), 2))
    flags = np.zeros(len(indices), bool)
    for n, t in enumerate(indices):
        x, y, th = curve.x[t], curve.y[t], curve.theta[t]
        nrm = (-np.sin(th), np.cos(th))
        k = profiler.layer(th)
        d = locate_edge(lambda s: profiler.profile(k, s, x, y, nrm, lam), lam, profiler.scales)
        if d is None:
            flags[n] = True
            d = 0.0
        xy[n] = (x + d * nrm[0], y + d * nrm[1])
    return xy, flags


# -- geodesic completion ---------------------------------------------------------

@dataclass
class CompletedContour:
    component: int
    points: np.ndarray          # (n, 3) closed loop, first sample not repeated
    modes: np.ndarray           # per sample: 0 spatial, 1 geodesic, 2 unrefined
    flagged_gaps: int = 0
    gaps: int = 0
    flagged_samples: int = 0


def _crop_box(pts, shape, margin):
    lo = np.floor(pts[:, :2].min(0) - margin).astype(int)
    hi = np.ceil(pts[:, :2].max(0) + margin).astype(int)
    lo = np.maximum(lo, 0)
    hi = np.minimum(hi, np.array(shape[:2]) - 1)
    return lo, hi


def track_gap(p_start, p_end, cost: np.ndarray, xi: float, model: str = "dc", margin: float = 12.0,
              guide: np.ndarray | None = None, solver_kw: dict | None = None) -> np.ndarray:
    """Geodesic samples from p_start to p_end on a cropped grid.

    The crop covers both endpoints and the ``guide`` samples (the initial
    contour of the gap) plus ``margin`` pixels.
    """
    solver_kw = solver_kw or {}
    pts = np.vstack([p_start[None, :], p_end[None, :]] + ([guide] if guide is not None and len(guide) else []))
    lo, hi = _crop_box(pts, cost.shape, margin)
    sub = cost[lo[0]:hi[0] + 1, lo[1]:hi[1] + 1, :]
    grid = GridSpec(*sub.shape)
    off = np.array([lo[0], lo[1], 0.0])
    a = np.asarray(p_start, float) - off
    b = np.asarray(p_end, float) - off
    a[2], b[2] = wrap_angle(a[2]), wrap_angle(b[2])
    if model == "dc":
        maps = dc_maps(sub, a, xi, grid, **solver_kw)
        tr = dc_query(maps, b)
    elif model == "dproj":
        res = solve_eikonal(sub, a, xi, forward=False, grid=grid, **solver_kw)
        tr = dproj_query(res, b)
    else:
        raise ValueError(f"unknown model {model!r}")
    return tr.curve.points + off


def complete_contour(init: InitialContour, segments: list[ContourSegment], refined: dict,
                     costs, xi: float, model: str = "dc", margin: float = 12.0,
                     step: float = 1.0, solver_kw: dict | None = None) -> CompletedContour:
    """Splice refined spatial runs and tracked gaps into a closed contour.

    ``refined`` maps a segment number to its refined (m, 2) positions.
    ``costs`` is either a GroupedCost (the field is chosen by the gap's start
    point, falling back to the contour's own component) or a plain cost array.
    A gap whose tracking fails keeps its initial samples and is flagged.
    """
    curve = init.curve
    P = curve.points
    if not any(s.mode == "spatial" for s in segments):
        return CompletedContour(init.component, P.copy(), np.full(len(P), 2), 1, 1)
    pieces, modes = [], []
    flagged = gaps = 0
    # start at a spatial segment so each gap sits between two refined runs
    k0 = next(k for k, s in enumerate(segments) if s.mode == "spatial")
    order = [segments[(k0 + j) % len(segments)] for j in range(len(segments))]
    ids = [(k0 + j) % len(segments) for j in range(len(segments))]
    for j, (sid, seg) in enumerate(zip(ids, order)):
        if seg.mode == "spatial":
            xy = refined[sid]
            th = curve.theta[seg.indices]
            pieces.append(np.column_stack([xy, th]))
            modes.append(np.zeros(len(xy), int))
            continue
        gaps += 1
        prev_sid, next_sid = ids[j - 1], ids[(j + 1) % len(ids)]
        a = np.append(refined[prev_sid][-1], curve.theta[order[j - 1].indices[-1]])
        b = np.append(refined[next_sid][0], curve.theta[order[(j + 1) % len(order)].indices[0]])
        guide = P[seg.indices]
        try:
            if isinstance(costs, GroupedCost):
                try:
                    _, C = select_cost(costs, a)
                except UnclaimedPointError:
                    C = costs.costs[init.component - 1]
            else:
                C = costs
            g = track_gap(a, b, C, xi, model, margin, guide, solver_kw)
            # drop the endpoints, they belong to the adjacent spatial runs
            inner = _resample_open(g, step)[1:-1]
            pieces.append(inner)
            modes.append(np.ones(len(inner), int))
        except (BacktrackingError, NonConvergenceError, ValueError) as exc:
            log.warning("gap %d of component %d kept unrefined: %s", sid, init.component, exc)
            flagged += 1
            pieces.append(guide)
            modes.append(np.full(len(guide), 2))
    pts = np.vstack(pieces)
    pts[:, 2] = wrap_angle(pts[:, 2])
    return CompletedContour(init.component, pts, np.concatenate(modes), flagged, gaps)


def _resample_open(pts: np.ndarray, step: float) -> np.ndarray:
    """Resample an open polyline at spatial arclength ``step`` keeping both ends."""
    d = np.linalg.norm(np.diff(pts[:, :2], axis=0), axis=1)
    s = np.concatenate([[0], np.cumsum(d)])
    L = s[-1]
    if L < 1e-9:
        return pts[[0, -1]]
    n = max(int(np.ceil(L / step)), 1)
    t = np.linspace(0, L, n + 1)
    th = np.unwrap(pts[:, 2])
    cols = [np.interp(t, s, pts[:, 0]), np.interp(t, s, pts[:, 1]), np.interp(t, s, th)]
    return np.stack(cols, 1)


# -- whole-contour driver ----------------------------------------------------------

@dataclass
class SegmentationResult:
    contours: list                       # CompletedContour per initial contour
    initial: list                        # InitialContour
    segments: list                       # per contour list of ContourSegment
    stats: dict = field(default_factory=dict)


def _segment_one(init, segs, profiler, costs, xi, radius, model, margin, solver_kw):
    refined, n_flag = {}, 0
    for k, s in enumerate(segs):
        if s.mode == "spatial":
            xy, fl = spatial_refine(init.curve, s.indices, profiler, radius)
            refined[k] = xy
            n_flag += int(fl.sum())
    cc = complete_contour(init, segs, refined, costs, xi, model, margin, solver_kw=solver_kw)
    cc.flagged_samples = n_flag
    return cc


def _segment_task(args):
    init, segs, U, scales, gamma, rest = args
    return _segment_one(init, segs, EdgeProfiler(U, scales, gamma), *rest)


def segment_contours(initial: list[InitialContour], U: np.ndarray, costs, xi: float,
                     alpha: float = DEFAULT_ALPHA, radius: float = 8.0, scales=(1.0, 2.0, 4.0),
                     gamma: float = 0.5, model: str = "dc", margin: float = 12.0,
                     min_spatial: int = 3, solver_kw: dict | None = None,
                     workers: int = 1) -> SegmentationResult:
    """Split, refine and complete every initial contour.

    With ``workers > 1`` contours are processed in a process pool; results
    keep the input order, so the output does not depend on the worker count.
    """
    segs_all = [split_by_horizontality(init.curve, alpha, init.component, min_spatial) for init in initial]
    rest = (costs, xi, radius, model, margin, solver_kw)
    if workers > 1 and len(initial) > 1:
        from concurrent.futures import ProcessPoolExecutor

        tasks = [(init, segs, U, scales, gamma, rest) for init, segs in zip(initial, segs_all)]
        with ProcessPoolExecutor(min(workers, len(initial))) as ex:
            out = list(ex.map(_segment_task, tasks))
    else:
        profiler = EdgeProfiler(U, scales, gamma)
        out = [_segment_one(init, segs, profiler, *rest) for init, segs in zip(initial, segs_all)]
    stats = {"contours": len(out), "flagged_samples": sum(c.flagged_samples for c in out),
             "gaps": sum(c.gaps for c in out), "flagged_gaps": sum(c.flagged_gaps for c in out)}
    return SegmentationResult(out, initial, segs_all, stats)
