"""Data-driven costs on R^2 x S^1, connected components and grouped costs.

The line measure V is a smoothed |Im U| (edges show up in the odd part of
the orientation score), symmetrised under the antipodal reflection so that
every field derived from it lives on the projective bundle.  Components are
computed on theta mod pi for the same reason.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc

from .errors import ConfigError, UnclaimedPointError
from .geometry import DEFAULT_METRIC, dilate, stencil_offsets
from .grid import GridSpec, symmetrize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CostParams:
    lam: float = 100.0
    p: float = 1.0
    sigma_s: float = 2.0
    sigma_a: float = 4 * 2 * np.pi / 48

    def __post_init__(self):
        if not (self.lam > 0 and self.p > 0):
            raise ConfigError(f"need lam > 0 and p > 0, got {self.lam}, {self.p}")
        if self.sigma_s < 0 or self.sigma_a < 0:
            raise ConfigError("smoothing scales must be non-negative")

    @property
    def delta(self) -> float:
        return 1.0 / (1.0 + self.lam)


def component_params(width: float) -> CostParams:
    """Settings of the grouping stage for structures of the given width."""
    return CostParams(lam=50.0, p=3.0, sigma_s=0.75 * width, sigma_a=2 * 2 * np.pi / 48)


def line_measure(U: np.ndarray, sigma_s: float, sigma_a: float) -> np.ndarray:
    """Edge measure in [0, 1]: Gaussian-smoothed |Im U|, symmetrised, max-normalised."""
    A = np.abs(np.imag(U)).astype(float)
    nt = A.shape[2]
    sig = (sigma_s, sigma_s, sigma_a / (2 * np.pi / nt))
    if max(sig) > 0:
        A = ndimage.gaussian_filter(A, sig, mode=("nearest", "nearest", "wrap"))
    A = symmetrize(A)
    m = A.max()
    return A / m if m > 0 else np.zeros_like(A)


def cost_from_measure(V: np.ndarray, params: CostParams) -> np.ndarray:
    """C = 1 / (1 + lam V^p), with range [delta, 1]."""
    V = np.clip(np.asarray(V, dtype=float), 0.0, 1.0)
    return 1.0 / (1.0 + params.lam * V**params.p)


@dataclass
class ComponentLabeling:
    labels: np.ndarray          # int32, 0 = background, full circle, antipodally symmetric
    n: int
    sizes: np.ndarray = field(default_factory=lambda: np.zeros(0, int))

    def mask(self, i: int) -> np.ndarray:
        return self.labels == i

    def projection(self) -> np.ndarray:
        """2D label image: the lowest component index present over theta."""
        lab = np.where(self.labels > 0, self.labels, np.iinfo(np.int32).max)
        out = lab.min(axis=2)
        out[out == np.iinfo(np.int32).max] = 0
        return out.astype(np.int32)


def _half(values):
    nt = values.shape[2]
    if nt % 2:
        raise ConfigError("need an even number of orientations")
    return values[:, :, : nt // 2]


def connected_components(V: np.ndarray, threshold: float = 0.5, g=DEFAULT_METRIC,
                         min_size: float = 1e-3) -> ComponentLabeling:
    """Label {V >= threshold * max V} under ball-kernel connectivity on theta mod pi.

    Two voxels are adjacent iff each lies in the other's translated ball (the
    relation is symmetric for the log-coordinate norm).  Components smaller
    than ``min_size`` times the number of voxels are dropped.  Labels are
    ordered by the smallest flat index of each component.
    """
    if not 0 < threshold < 1:
        raise ConfigError(f"threshold must lie in (0, 1), got {threshold}")
    V = np.asarray(V, dtype=float)
    nx, ny, nt = V.shape
    vmax = V.max()
    labels = np.zeros(V.shape, np.int32)
    if vmax <= 0:
        return ComponentLabeling(labels, 0)
    mask = _half(V >= threshold * vmax)
    ntp = nt // 2
    idx = np.full(mask.shape, -1, np.int64)
    nodes = np.flatnonzero(mask)
    if len(nodes) == 0:
        return ComponentLabeling(labels, 0)
    idx.ravel()[nodes] = np.arange(len(nodes))
    offs = stencil_offsets(nt, g)
    rows, cols = [], []
    for k in range(ntp):
        for di, dj, dk in offs[k]:
            if di == 0 and dj == 0 and dk == 0:
                continue
            i0 = slice(max(0, -di), min(nx, nx - di))
            i1 = slice(max(0, di), min(nx, nx + di))
            j0 = slice(max(0, -dj), min(ny, ny - dj))
            j1 = slice(max(0, dj), min(ny, ny + dj))
            a = idx[i0, j0, k]
            b = idx[i1, j1, (k + dk) % ntp]
            ok = (a >= 0) & (b >= 0)
            rows.append(a[ok])
            cols.append(b[ok])
    r = np.concatenate(rows) if rows else np.zeros(0, np.int64)
    c = np.concatenate(cols) if cols else np.zeros(0, np.int64)
    A = coo_matrix((np.ones(len(r), np.int8), (r, c)), shape=(len(nodes), len(nodes)))
    _, comp = _cc(A, directed=False)
    counts = np.bincount(comp)
    keep = counts >= min_size * V.size / 2
    # relabel kept components in order of first appearance
    _, first = np.unique(comp, return_index=True)
    order = [c for c in np.argsort(first, kind="stable") if keep[c]]
    lut = np.zeros(len(counts), np.int32)
    lut[order] = np.arange(1, len(order) + 1)
    half = np.zeros(mask.shape, np.int32)
    half.ravel()[nodes] = lut[comp]
    labels = np.concatenate([half, half], axis=2)
    sizes = np.bincount(labels.ravel(), minlength=len(order) + 1)[1:]
    return ComponentLabeling(labels, len(order), sizes)


def projection_components(V: np.ndarray, threshold: float = 0.5) -> tuple[np.ndarray, int]:
    """Plain 2D labeling of the spatial projection of the thresholded set."""
    V = np.asarray(V, dtype=float)
    mask = (V >= threshold * V.max()).any(axis=2) if V.max() > 0 else np.zeros(V.shape[:2], bool)
    lab, n = ndimage.label(mask)
    return lab, n


@dataclass
class GroupedCost:
    costs: list                 # C_{K_i}, i = 1..n
    claimed: np.ndarray         # int32 owner of each claimed low-cost voxel, 0 = none
    regions: list               # dilated claimed sets (bool), where costs[i] = C
    iterations: int
    stalled: bool = False

    @property
    def n(self) -> int:
        return len(self.costs)


def group_cost(C: np.ndarray, labeling: ComponentLabeling, g=DEFAULT_METRIC, low: float = 0.1,
               max_iters: int | None = None) -> GroupedCost:
    """Connected-component-informed costs.

    Low-cost voxels (C <= ``low``) are claimed by iterated dilation of the
    component indicators; a voxel goes to the first component whose dilation
    reaches it, ties to the lowest index.  Each cost equals C on the claimed
    set dilated once more and 1 elsewhere.
    """
    n = labeling.n
    if n < 1:
        raise ConfigError("grouping needs at least one component")
    C = np.asarray(C, dtype=float)
    if C.shape != labeling.labels.shape:
        raise ConfigError(f"cost shape {C.shape} != labels {labeling.labels.shape}")
    nx, ny, nt = C.shape
    # work on theta mod pi; symmetric inputs give symmetric outputs
    Ch = _half(symmetrize(C))
    lab = _half(labeling.labels)
    avail = Ch <= low
    owner = np.zeros(lab.shape, np.int32)
    grown = [lab == i + 1 for i in range(n)]
    if max_iters is None:
        # grid diameter in stencil steps: the ball reaches at least one voxel spatially
        max_iters = nx + ny + nt
    it = 0
    stalled = False
    while avail.any():
        it += 1
        if it > max_iters:
            stalled = True
            break
        changed = False
        for i in range(n):
            w = dilate(grown[i], g, projective=True)
            got = w & avail
            owner[got] = i + 1
            avail &= ~got
            if not changed and np.count_nonzero(w) > np.count_nonzero(grown[i]):
                changed = True
            grown[i] = w
        if not changed:
            stalled = True
            break
    if stalled and avail.any():
        log.warning("grouping stalled with %d unclaimed low-cost voxels; assigning by distance",
                    int(avail.sum()))
        claimed_any = owner > 0
        if claimed_any.any():
            _, ind = ndimage.distance_transform_edt(~claimed_any, return_indices=True)
            near = owner[tuple(ind)]
            owner[avail] = near[avail]
    owner_full = np.concatenate([owner, owner], axis=2)
    costs, regions = [], []
    for i in range(n):
        reg = dilate(owner == i + 1, g, projective=True)
        reg = np.concatenate([reg, reg], axis=2)
        regions.append(reg)
        costs.append(np.where(reg, C, 1.0))
    return GroupedCost(costs, owner_full, regions, it, stalled)


def select_cost(grouped: GroupedCost, p1, grid: GridSpec | None = None) -> tuple[int, np.ndarray]:
    """(component index, C_{K_i}) for the component whose claimed region contains p1.

    The undilated claim decides first; otherwise the lowest-index dilated
    region containing p1.
    """
    grid = grid or GridSpec(*grouped.claimed.shape)
    i, j, k = grid.index_of(p1)
    o = int(grouped.claimed[i, j, k])
    if o > 0:
        return o, grouped.costs[o - 1]
    for idx, reg in enumerate(grouped.regions):
        if reg[i, j, k]:
            return idx + 1, grouped.costs[idx]
    raise UnclaimedPointError(f"point {tuple(p1)} lies in no claimed region; use the ungrouped cost")
