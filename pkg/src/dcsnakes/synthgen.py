"""Synthetic SEM-like scenes with overlapping bars and exact ground truth.

Images are indexed [x, y] like every other field in the package; PNG
export transposes to the usual row = y layout.  Bottom-layer structures
stay faintly visible under the top layer, scaled by an attenuation factor
that stands in for the top-layer height.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from skimage.draw import polygon as fill_polygon

from .errors import ConfigError

BACKGROUND = 0.08
BOTTOM = 0.5
TOP = 0.6


def attenuation_for_height(h: float) -> float:
    """Linear map from top-layer height to bottom-layer visibility: 0.9 at h=5, 0.2 at h=40."""
    return float(np.clip(0.9 + (h - 5.0) * (0.2 - 0.9) / 35.0, 0.0, 1.0))


@dataclass
class Bar:
    cx: float
    cy: float
    length: float
    width: float
    angle: float = 0.0          # direction of the long axis
    layer: str = "top"

    def corners(self) -> np.ndarray:
        """Counter-clockwise corners (4, 2)."""
        c, s = np.cos(self.angle), np.sin(self.angle)
        u = np.array([c, s]) * self.length / 2
        v = np.array([-s, c]) * self.width / 2
        ctr = np.array([self.cx, self.cy])
        return np.array([ctr - u - v, ctr + u - v, ctr + u + v, ctr - u + v])


@dataclass
class SceneSpec:
    size: tuple = (128, 128)
    bars: list = field(default_factory=list)
    attenuation: float = 1.0
    roughness: float = 0.5
    corr_length: float = 8.0
    noise: float = 0.02
    seed: int = 0
    margin_factor: float = 2.0

    def validate(self):
        if not self.bars:
            raise ConfigError("scene has no bars")
        if not 0 <= self.attenuation <= 1:
            raise ConfigError(f"attenuation must lie in [0, 1], got {self.attenuation}")
        nx, ny = self.size
        for b in self.bars:
            if b.layer not in ("top", "bottom"):
                raise ConfigError(f"unknown layer {b.layer!r}")
            if b.width <= 0 or b.length <= 0:
                raise ConfigError("bar sizes must be positive")
            m = self.margin_factor * b.width
            cs = b.corners()
            if cs[:, 0].min() < m - 1e-9 or cs[:, 1].min() < m - 1e-9 \
                    or cs[:, 0].max() > nx - 1 - m + 1e-9 or cs[:, 1].max() > ny - 1 - m + 1e-9:
                raise ConfigError(f"bar at ({b.cx}, {b.cy}) violates the {m:g} px margin")


@dataclass
class Scene:
    image: np.ndarray
    contours: list              # closed outlines (n, 2), first point not repeated
    bars: list
    spec: SceneSpec


def preset(name: str, seed: int = 0) -> SceneSpec:
    """Presets ``cd{8,12,16}-h{5,15,25,40}``: two long top bars over two shorter bottom bars."""
    m = re.fullmatch(r"cd(\d+)-h(\d+)", name)
    if not m:
        raise ConfigError(f"unknown preset {name!r}; expected cd<width>-h<height>")
    w, h = int(m.group(1)), int(m.group(2))
    if w not in (8, 12, 16) or h not in (5, 15, 25, 40):
        raise ConfigError(f"preset {name!r} outside cd{{8,12,16}}-h{{5,15,25,40}}")
    nx, ny = 14 * w + 2, 16 * w + 2
    # small fractional offset keeps edges off the pixel lattice
    o = 0.3
    bars = [
        Bar(5 * w + o, 8 * w + o, 12 * w, w, np.pi / 2, "top"),
        Bar(9 * w + o, 8 * w + o, 12 * w, w, np.pi / 2, "top"),
        Bar(7 * w + o, 6 * w + o, 10 * w, w, 0.0, "bottom"),
        Bar(7 * w + o, 10 * w + o, 10 * w, w, 0.0, "bottom"),
    ]
    return SceneSpec((nx, ny), bars, attenuation_for_height(h), seed=seed)


def _gp_loop(n: int, spacing: float, amplitude: float, corr: float, rng) -> np.ndarray:
    """Periodic Gaussian-process sample with squared-exponential covariance."""
    if amplitude == 0 or n == 0:
        return np.zeros(n)
    white = rng.standard_normal(n)
    freq = np.fft.fftfreq(n, d=spacing)
    # smoothing white noise with a Gaussian of std corr/sqrt(2) gives SE covariance of length corr
    kern = np.exp(-0.5 * (2 * np.pi * freq * corr / np.sqrt(2)) ** 2)
    out = np.real(np.fft.ifft(np.fft.fft(white) * kern))
    sd = out.std()
    return out * (amplitude / sd) if sd > 0 else out


def rough_outline(bar: Bar, amplitude: float, corr: float, rng, spacing: float = 0.5) -> np.ndarray:
    """Densely sampled closed outline displaced along the side normals."""
    cs = bar.corners()
    pts, normals = [], []
    for a in range(4):
        p, q = cs[a], cs[(a + 1) % 4]
        L = np.linalg.norm(q - p)
        m = max(int(np.ceil(L / spacing)), 1)
        t = np.arange(m)[:, None] / m
        pts.append(p + t * (q - p))
        d = (q - p) / L
        # outward normal of a counter-clockwise loop
        normals.append(np.repeat([[d[1], -d[0]]], m, axis=0))
    pts = np.concatenate(pts)
    normals = np.concatenate(normals)
    disp = _gp_loop(len(pts), spacing, amplitude, corr, rng)
    return pts + disp[:, None] * normals


def coverage(outline: np.ndarray, shape, supersample: int = 4) -> np.ndarray:
    """Area fraction of each pixel inside the polygon (pixel centres at integers)."""
    s = supersample
    nx, ny = shape
    # fine sample (a, b) sits at x = (a + 0.5) / s - 0.5
    fx = (outline[:, 0] + 0.5) * s - 0.5
    fy = (outline[:, 1] + 0.5) * s - 0.5
    rr, cc = fill_polygon(fx, fy, (nx * s, ny * s))
    fine = np.zeros((nx * s, ny * s))
    fine[rr, cc] = 1.0
    return fine.reshape(nx, s, ny, s).mean(axis=(1, 3))


def generate(spec: SceneSpec) -> Scene:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    shape = tuple(spec.size)
    top = np.zeros(shape)
    bottom = np.zeros(shape)
    contours = []
    for b in spec.bars:
        out = rough_outline(b, spec.roughness, spec.corr_length, rng)
        contours.append(out)
        cov = coverage(out, shape)
        tgt = top if b.layer == "top" else bottom
        np.maximum(tgt, cov, out=tgt)
    img = (BACKGROUND + (BOTTOM - BACKGROUND) * bottom * (1 - top) + (TOP - BACKGROUND) * top
           + spec.attenuation * (BOTTOM - BACKGROUND) * top * bottom)
    if spec.noise > 0:
        img = img + rng.normal(0.0, spec.noise, shape)
    img = np.clip(img, 0.0, 1.0)
    return Scene(img, contours, list(spec.bars), spec)


def save_png(path, image: np.ndarray):
    """16-bit grayscale PNG of an [x, y] image with values in [0, 1]."""
    a = np.round(np.clip(image, 0, 1).T * 65535).astype(np.uint16)
    Image.fromarray(a).save(path)


def load_image(path) -> np.ndarray:
    """Read a grayscale image as float [x, y] in [0, 1]."""
    im = Image.open(path)
    a = np.asarray(im)
    if a.ndim == 3:
        a = np.asarray(im.convert("L"))
    scale = 65535.0 if a.dtype == np.uint16 or a.max() > 255 else 255.0
    return (a.astype(float) / scale).T


def save_contours_csv(path, contours, ids=None):
    """One row per sample: structure, index, x, y."""
    ids = ids if ids is not None else range(1, len(contours) + 1)
    with open(path, "w") as fh:
        fh.write("structure,index,x,y\n")
        for sid, c in zip(ids, contours):
            for i, (x, y) in enumerate(np.asarray(c)[:, :2]):
                fh.write(f"{sid},{i},{x:.4f},{y:.4f}\n")


def load_contours_csv(path) -> dict:
    data = np.genfromtxt(path, delimiter=",", names=True)
    data = np.atleast_1d(data)
    out = {}
    for sid in np.unique(data["structure"]):
        rows = data[data["structure"] == sid]
        rows = rows[np.argsort(rows["index"])]
        out[int(sid)] = np.stack([rows["x"], rows["y"]], axis=1)
    return out


def write_scene(scene: Scene, outdir, stem: str = "scene") -> dict:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {"image": outdir / f"{stem}.png", "gt": outdir / f"{stem}_gt.csv",
             "labels": outdir / f"{stem}_labels.json"}
    save_png(paths["image"], scene.image)
    save_contours_csv(paths["gt"], scene.contours)
    spec = asdict(scene.spec)
    labels = {"structures": [{"id": i + 1, **asdict(b)} for i, b in enumerate(scene.bars)],
              "size": list(scene.spec.size), "attenuation": scene.spec.attenuation,
              "roughness": scene.spec.roughness, "noise": scene.spec.noise, "seed": scene.spec.seed,
              "spec": spec}
    paths["labels"].write_text(json.dumps(labels, indent=2, default=float))
    return {k: str(v) for k, v in paths.items()}
