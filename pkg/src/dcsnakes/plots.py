"""Matplotlib (Agg) figures written straight to files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from PIL import Image  # noqa: E402

# fixed qualitative palette; component i always gets PALETTE[i % len]
PALETTE = np.array([
    (230, 25, 75), (60, 180, 75), (0, 130, 200), (245, 130, 48), (145, 30, 180),
    (70, 240, 240), (240, 50, 230), (210, 245, 60), (250, 190, 212), (0, 128, 128),
], dtype=np.uint8)


def palette(n: int) -> np.ndarray:
    """n RGB colours, uint8; equal n gives equal colours."""
    return PALETTE[np.arange(n) % len(PALETTE)]


def _gray_rgb(image: np.ndarray) -> np.ndarray:
    """[x, y] image in [0, 1] to an (ny, nx, 3) uint8 raster."""
    a = np.round(np.clip(np.asarray(image, float), 0, 1).T * 255).astype(np.uint8)
    return np.repeat(a[:, :, None], 3, axis=2)


def _draw_segment(rgb, p, q, color):
    ny, nx = rgb.shape[:2]
    n = int(np.ceil(np.hypot(*(q - p)) * 2)) + 1
    t = np.linspace(0, 1, n)[:, None]
    pts = np.round(p + t * (q - p)).astype(int)
    ok = (pts[:, 0] >= 0) & (pts[:, 0] < nx) & (pts[:, 1] >= 0) & (pts[:, 1] < ny)
    rgb[pts[ok, 1], pts[ok, 0]] = color


def overlay_raster(image: np.ndarray, contours, closed: bool = True) -> np.ndarray:
    """RGB raster of the image with each contour drawn as a 1 px polyline in its own colour."""
    rgb = _gray_rgb(image)
    cols = palette(len(contours))
    for c, col in zip(contours, cols):
        pts = np.asarray(c, float)[:, :2]
        if len(pts) == 0:
            continue
        if len(pts) == 1:
            _draw_segment(rgb, pts[0], pts[0], col)
        loop = np.vstack([pts, pts[:1]]) if closed else pts
        for a, b in zip(loop[:-1], loop[1:]):
            _draw_segment(rgb, a, b, col)
    return rgb


def save_overlay(path, image: np.ndarray, contours, closed: bool = True):
    Image.fromarray(overlay_raster(image, contours, closed)).save(path)


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def plot_field_projection(path, values: np.ndarray, title: str = "", reduce: str = "max", cmap="viridis"):
    """Max (or min) over orientations of a field on R^2 x S^1."""
    proj = values.max(axis=2) if reduce == "max" else values.min(axis=2)
    fig, ax = plt.subplots(figsize=(5, 5))
    im = ax.imshow(proj.T, origin="lower", cmap=cmap)
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_title(title)
    _finish(fig, path)


def plot_labels(path, labels2d: np.ndarray, title: str = "components"):
    n = int(labels2d.max())
    rgb = np.zeros(labels2d.shape + (3,), np.uint8)
    for i, col in enumerate(palette(n)):
        rgb[labels2d == i + 1] = col
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(np.transpose(rgb, (1, 0, 2)), origin="lower")
    ax.set_title(f"{title} ({n})")
    _finish(fig, path)


def plot_segments(path, image: np.ndarray, initial, segments):
    """Initial contours coloured by mode: spatial runs blue, geodesic gaps red."""
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.imshow(image.T, origin="lower", cmap="gray")
    for init, segs in zip(initial, segments):
        c = init.curve
        for s in segs:
            ax.plot(c.x[s.indices], c.y[s.indices], ".", ms=2,
                    color="tab:blue" if s.mode == "spatial" else "tab:red")
    ax.set_title("horizontality split (blue spatial, red geodesic)")
    _finish(fig, path)


def plot_track(path, cost: np.ndarray, curve_pts: np.ndarray, title: str = ""):
    fig, ax = plt.subplots(1, 2, figsize=(10, 4.5))
    ax[0].imshow(cost.min(axis=2).T, origin="lower", cmap="gray")
    ax[0].plot(curve_pts[:, 0], curve_pts[:, 1], "r-", lw=1)
    ax[0].set_title(title or "track")
    s = np.concatenate([[0], np.cumsum(np.linalg.norm(np.diff(curve_pts[:, :2], axis=0), axis=1))])
    ax[1].plot(s, np.unwrap(curve_pts[:, 2]), "k-")
    ax[1].set_xlabel("spatial arclength (px)")
    ax[1].set_ylabel("theta (unwrapped)")
    _finish(fig, path)


def plot_sphere_slices(path, sf, radii, layers=None):
    """Level sets of the per-source fields on a few orientation layers."""
    nt = sf.combined.shape[2]
    layers = layers if layers is not None else [0, nt // 8, nt // 4, nt // 2]
    fig, axes = plt.subplots(1, len(layers), figsize=(4 * len(layers), 4))
    n = sf.combined.shape[0]
    ext = np.array([-sf.center[0], n - 1 - sf.center[0], -sf.center[1], n - 1 - sf.center[1]]) / sf.scale
    lv = sorted(r for r in radii if r > 0)
    for ax, k in zip(np.atleast_1d(axes), layers):
        for tag, col in (("p0", "tab:green"), ("p0bar", "tab:red")):
            W = sf.fields[tag][:, :, k]
            if lv and np.isfinite(W).any():
                ax.contour(W.T, levels=lv, colors=col, extent=ext, origin="lower", linewidths=0.8)
        ax.set_title(f"theta = {k * sf.dtheta:.2f}")
        ax.set_aspect("equal")
    fig.suptitle(f"{sf.model} fronts")
    _finish(fig, path)


def plot_cone(path, rows):
    """Endpoints in the plane, coloured by cusp-free-cone membership."""
    x = np.array([r["x"] for r in rows])
    y = np.array([r["y"] for r in rows])
    m = np.array([r["member"] for r in rows], bool)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(x[m], y[m], s=10, c="tab:green", label="cusp-free")
    ax.scatter(x[~m], y[~m], s=10, c="tab:red", label="cusp")
    ax.set_aspect("equal")
    ax.legend(loc="upper right")
    ax.set_title("d_proj minimisers from the origin")
    _finish(fig, path)


def plot_eval(path, image: np.ndarray, pred: dict, gt: dict):
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.imshow(image.T, origin="lower", cmap="gray")
    for c in gt.values():
        c = np.vstack([c, c[:1]])
        ax.plot(c[:, 0], c[:, 1], "g-", lw=0.8)
    cols = palette(len(pred)) / 255.0
    for col, c in zip(cols, pred.values()):
        c = np.vstack([c, c[:1]])
        ax.plot(c[:, 0], c[:, 1], "-", color=col, lw=0.8)
    ax.set_title("prediction (colour) vs ground truth (green)")
    _finish(fig, path)
