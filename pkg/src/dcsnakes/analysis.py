"""Contour metrics and geometric diagnostics of the distance models."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DomainError

# -- MASD / Hausdorff --------------------------------------------------------------


def resample_loop(pts, max_step: float = 0.5) -> np.ndarray:
    """Closed curve (first point not repeated) resampled at arclength steps <= max_step."""
    pts = np.asarray(pts, dtype=float)[:, :2]
    if len(pts) < 2:
        raise DomainError("a curve needs at least two distinct points")
    loop = np.vstack([pts, pts[:1]])
    seg = np.linalg.norm(np.diff(loop, axis=0), axis=1)
    s = np.concatenate([[0], np.cumsum(seg)])
    L = s[-1]
    if L <= 0:
        raise DomainError("degenerate curve of zero length")
    n = max(int(np.ceil(L / max_step)), 3)
    t = np.arange(n) * L / n
    return np.stack([np.interp(t, s, loop[:, 0]), np.interp(t, s, loop[:, 1])], axis=1)


def point_to_loop(points: np.ndarray, loop: np.ndarray, chunk: int = 1024) -> np.ndarray:
    """Euclidean distance from each point to the closed polyline ``loop``."""
    a = loop
    b = np.roll(loop, -1, axis=0)
    ab = b - a
    ll = np.maximum((ab**2).sum(1), 1e-300)
    out = np.empty(len(points))
    for s in range(0, len(points), chunk):
        p = points[s:s + chunk, None, :]
        t = np.clip(((p - a[None]) * ab[None]).sum(-1) / ll[None], 0.0, 1.0)
        q = a[None] + t[..., None] * ab[None]
        out[s:s + chunk] = np.sqrt(((p - q) ** 2).sum(-1)).min(1)
    # samples lying on the loop come back as ~1e-16 from the projection; that is rounding, not distance
    out[out <= 1e-12 * max(np.ptp(loop, axis=0).max(), 1.0)] = 0.0
    return out


@dataclass
class CurvePair:
    out: np.ndarray
    gt: np.ndarray
    pair_id: int = 0
    # original vertices; the sup in the Hausdorff distance can sit on a corner
    out_vertices: np.ndarray | None = None
    gt_vertices: np.ndarray | None = None

    @classmethod
    def from_curves(cls, out, gt, pair_id: int = 0, max_step: float = 0.5) -> "CurvePair":
        ov = np.asarray(out, dtype=float)[:, :2]
        gv = np.asarray(gt, dtype=float)[:, :2]
        return cls(resample_loop(ov, max_step), resample_loop(gv, max_step), pair_id, ov, gv)


def _as_pair(a, b):
    if isinstance(a, CurvePair):
        return a
    return CurvePair.from_curves(a, b)


def _target(samples, vertices):
    # distances go to the original polyline when it is known
    return samples if vertices is None else vertices


def masd(a, b=None) -> float:
    """Mean average surface distance between two closed curves (pixels)."""
    pr = _as_pair(a, b)
    d1 = point_to_loop(pr.out, _target(pr.gt, pr.gt_vertices)).mean()
    d2 = point_to_loop(pr.gt, _target(pr.out, pr.out_vertices)).mean()
    return float(0.5 * (d1 + d2))


def hausdorff(a, b=None) -> float:
    """Symmetric Hausdorff distance between two closed curves (pixels)."""
    pr = _as_pair(a, b)
    po = pr.out if pr.out_vertices is None else np.vstack([pr.out, pr.out_vertices])
    pg = pr.gt if pr.gt_vertices is None else np.vstack([pr.gt, pr.gt_vertices])
    return float(max(point_to_loop(po, _target(pr.gt, pr.gt_vertices)).max(),
                     point_to_loop(pg, _target(pr.out, pr.out_vertices)).max()))


def match_contours(pred: dict, gt: dict) -> list[tuple]:
    """Pair predicted and ground-truth contours by minimal total MASD.

    Returns (gt id, pred id or None, masd, hausdorff) per ground-truth curve;
    an unmatched ground-truth curve gets None and inf metrics.
    """
    gids, pids = list(gt), list(pred)
    if not pids:
        return [(g, None, float("inf"), float("inf")) for g in gids]
    pairs = {(g, p): CurvePair.from_curves(pred[p], gt[g]) for g in gids for p in pids}
    M = np.array([[masd(pairs[g, p]) for p in pids] for g in gids])
    r, c = linear_sum_assignment(M)
    got = {gids[i]: pids[j] for i, j in zip(r, c)}
    rows = []
    for g in gids:
        p = got.get(g)
        if p is None:
            rows.append((g, None, float("inf"), float("inf")))
        else:
            rows.append((g, p, masd(pairs[g, p]), hausdorff(pairs[g, p])))
    return rows


def load_pred_csv(path) -> dict:
    """Contours CSV written by the segment command (structure, index, x, y[, theta, mode])."""
    data = np.atleast_1d(np.genfromtxt(path, delimiter=",", names=True))
    out = {}
    for sid in np.unique(data["structure"]):
        rows = data[data["structure"] == sid]
        rows = rows[np.argsort(rows["index"])]
        out[int(sid)] = np.stack([rows["x"], rows["y"]], axis=1)
    return out


def evaluate(pred: dict, gt: dict) -> dict:
    rows = match_contours(pred, gt)
    per = [{"gt": int(g), "pred": (None if p is None else int(p)), "masd": m, "hausdorff": h}
           for g, p, m, h in rows]
    finite = [r["masd"] for r in per if np.isfinite(r["masd"])]
    return {"structures": per,
            "median_masd": float(np.median(finite)) if finite else float("inf"),
            "max_hausdorff": float(max(r["hausdorff"] for r in per)) if per else float("inf")}


# -- spheres and fronts ---------------------------------------------------------------

@dataclass
class FrontMesh:
    radius: float
    tag: str
    vertices: np.ndarray        # (n, 3) in (x, y, theta), spatial units of the model
    faces: np.ndarray           # (m, 3) zero-based

    @property
    def empty(self) -> bool:
        return len(self.vertices) == 0


@dataclass
class SphereFields:
    """Per-source distance fields for the spheres of one model around [p0] = [(0, 0, 0)]."""
    model: str
    fields: dict                # tag -> W, grid layout [x, y, k]
    combined: np.ndarray
    scale: float                # pixels per spatial unit
    center: tuple               # grid index of the origin
    dtheta: float


def sphere_fields(model: str, xi: float = 1.0, n: int = 64, ntheta: int = 32, scale: float = 10.0,
                  **solver_kw) -> SphereFields:
    """C = 1 distance fields from p0 = (0, 0, 0) and its antipode on an n x n x ntheta grid.

    The configuration is realised at ``scale`` pixels per unit, so the solver
    runs with xi / scale.  ``dc`` uses F0+ (no reverse gear), ``dproj`` F0.
    """
    from .eikonal import solve_eikonal
    from .grid import GridSpec, reflect

    if model not in ("dc", "dproj"):
        raise ValueError(f"unknown model {model!r}")
    g = GridSpec(n, n, ntheta)
    c = n // 2
    fwd = model == "dc"
    W0 = solve_eikonal(1.0, (c, c, 0.0), xi / scale, forward=fwd, grid=g, **solver_kw).W
    W1 = solve_eikonal(1.0, (c, c, np.pi), xi / scale, forward=fwd, grid=g, **solver_kw).W
    if fwd:
        comb = np.minimum.reduce([W0, W1, reflect(W0), reflect(W1)])
    else:
        comb = np.minimum(W0, reflect(W0))
    return SphereFields(model, {"p0": W0, "p0bar": W1}, comb, scale, (c, c), g.dtheta)


def sphere_mesh(sf: SphereFields, radii) -> list[FrontMesh]:
    """Marching-cubes fronts {W = R} per source plus the combined sphere."""
    from skimage.measure import marching_cubes

    out = []
    c = np.array([sf.center[0], sf.center[1], 0.0])
    tags = list(sf.fields.items()) + [("combined", sf.combined)]
    for R in radii:
        for tag, W in tags:
            if R <= 0:
                out.append(FrontMesh(float(R), tag, np.zeros((1, 3)), np.zeros((0, 3), int)))
                continue
            F = np.where(np.isfinite(W), W, np.nanmax(W[np.isfinite(W)]) * 2)
            F = np.concatenate([F, F[:, :, :1]], axis=2)    # close the periodic fiber
            if not F.min() < R < F.max():
                out.append(FrontMesh(float(R), tag, np.zeros((0, 3)), np.zeros((0, 3), int)))
                continue
            verts, faces, _, _ = marching_cubes(F, level=R)
            v = (verts - c) / np.array([sf.scale, sf.scale, 1.0])
            v[:, 2] = verts[:, 2] * sf.dtheta
            out.append(FrontMesh(float(R), tag, v, faces))
    return out


def write_obj(path, meshes: list[FrontMesh]):
    """One OBJ with a group and material per (radius, tag) front."""
    path = Path(path)
    mtl = path.with_suffix(".mtl")
    colors = {"p0": (0.1, 0.7, 0.2), "p0bar": (0.8, 0.1, 0.1), "combined": (0.2, 0.3, 0.9)}
    with open(mtl, "w") as fh:
        for tag, (r, g, b) in colors.items():
            fh.write(f"newmtl {tag}\nKd {r:.3f} {g:.3f} {b:.3f}\n\n")
    base = 1
    with open(path, "w") as fh:
        fh.write(f"mtllib {mtl.name}\n")
        for m in meshes:
            fh.write(f"g R{m.radius:g}_{m.tag}\nusemtl {m.tag}\n")
            for v in m.vertices:
                fh.write(f"v {v[0]:.5f} {v[1]:.5f} {v[2]:.5f}\n")
            for f in m.faces:
                fh.write(f"f {f[0] + base} {f[1] + base} {f[2] + base}\n")
            base += len(m.vertices)


def collision_radius(sf: SphereFields, layer: int = 0) -> tuple[float, tuple]:
    """Smallest level at which the fronts from p0 and p0bar meet on one orientation layer.

    Scans the zero crossings of W_p0 - W_p0bar between neighbouring voxels
    and interpolates W_p0 there.  Returns (radius, (x, y) in units).
    """
    G, R = sf.fields["p0"][:, :, layer], sf.fields["p0bar"][:, :, layer]
    D = G - R
    best, where = np.inf, (np.nan, np.nan)
    for ax in (0, 1):
        a = [slice(None)] * 2
        b = [slice(None)] * 2
        a[ax], b[ax] = slice(0, -1), slice(1, None)
        Da, Db = D[tuple(a)], D[tuple(b)]
        Ga, Gb = G[tuple(a)], G[tuple(b)]
        m = (np.sign(Da) != np.sign(Db)) & np.isfinite(Da) & np.isfinite(Db)
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(m, Da / np.where(m, Da - Db, 1.0), 0.0)
        val = np.where(m, Ga + t * (Gb - Ga), np.inf)
        i = np.unravel_index(np.argmin(val), val.shape)
        if val[i] < best:
            best = float(val[i])
            p = np.array(i, float)
            p[ax] += float(t[i])
            where = tuple((p - np.array(sf.center)) / sf.scale)
    return best, where


# -- cone sampling ------------------------------------------------------------------------

def cone_endpoints(radii, angles, thetas) -> np.ndarray:
    """Endpoints (x, y, theta) in units on a polar grid around the origin."""
    pts = [(r * np.cos(a), r * np.sin(a), t) for r in radii for a in angles for t in thetas]
    return np.array(pts, float)


def cone_sample(xi: float, endpoints, n: int = 96, ntheta: int = 32, scale: float = 8.0,
                tol: float = 0.03, **solver_kw) -> list[dict]:
    """Cusp-free-cone membership of [p1] relative to [p0] = [(0, 0, 0)] under C = 1.

    An endpoint is a member when the d_proj minimiser has no cusp.  Rows
    carry both distances so the d_c / d_proj agreement can be checked.
    """
    from .grid import GridSpec
    from .tracking import classify_regime, dc_maps
    from .eikonal import solve_eikonal

    g = GridSpec(n, n, ntheta)
    c = n // 2
    x = xi / scale
    maps = dc_maps(1.0, (c, c, 0.0), x, g, **solver_kw)
    proj = solve_eikonal(1.0, (c, c, 0.0), x, forward=False, grid=g, **solver_kw)
    rows = []
    for e in np.asarray(endpoints, float):
        p = np.array([c + e[0] * scale, c + e[1] * scale, e[2] % (2 * np.pi)])
        if not g.contains(p):
            raise DomainError(f"endpoint {tuple(e)} outside the sampling grid")
        r = classify_regime(p, maps, proj, tol)
        rows.append({"x": float(e[0]), "y": float(e[1]), "theta": float(e[2]), "member": bool(r.in_cone),
                     "dc": r.dc, "dproj": r.dproj, "cusps": len(r.cusps),
                     "consistent": r.consistent})
    return rows


def write_rows_csv(path, rows: list[dict]):
    if not rows:
        Path(path).write_text("")
        return
    keys = list(rows[0])
    with open(path, "w") as fh:
        fh.write(",".join(keys) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(r[k]) for k in keys) + "\n")


def _fmt(v):
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, default=_json_default))


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))
