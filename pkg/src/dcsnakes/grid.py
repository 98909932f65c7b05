"""Discrete position-orientation grids on R^2 x S^1.

Arrays are indexed ``[x, y, k]`` with node ``(i, j, k)`` sitting at
``(x, y, theta) = (i, j, k * dtheta)``.  The spatial step is one pixel and
``dtheta = 2 pi / ntheta``.  The orientation axis is periodic and ``ntheta``
is even, so the antipodal map ``theta -> theta + pi`` is an index shift.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError

TWO_PI = 2.0 * np.pi


def wrap_angle(theta):
    """Wrap angles to [0, 2 pi)."""
    t = np.mod(theta, TWO_PI)
    # tiny negative inputs round up to exactly 2 pi
    return np.where(t >= TWO_PI, 0.0, t) if np.ndim(t) else (0.0 if t >= TWO_PI else t)


def wrap_signed(theta):
    """Wrap angles to (-pi, pi]."""
    t = np.mod(np.asarray(theta, dtype=float) + np.pi, TWO_PI) - np.pi
    return np.where(t == -np.pi, np.pi, t)


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    ntheta: int

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ConfigError(f"grid needs nx, ny >= 2, got {self.nx}x{self.ny}")
        if self.ntheta < 4 or self.ntheta % 2:
            raise ConfigError(f"ntheta must be even and >= 4, got {self.ntheta}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.ntheta)

    @property
    def dx(self) -> float:
        return 1.0

    @property
    def dtheta(self) -> float:
        return TWO_PI / self.ntheta

    @property
    def thetas(self) -> np.ndarray:
        return np.arange(self.ntheta) * self.dtheta

    @property
    def size(self) -> int:
        return self.nx * self.ny * self.ntheta

    def contains(self, p) -> bool:
        x, y = float(p[0]), float(p[1])
        return 0.0 <= x <= self.nx - 1 and 0.0 <= y <= self.ny - 1

    def index_of(self, p) -> tuple[int, int, int]:
        """Nearest grid node of a continuous point."""
        if not self.contains(p):
            raise DomainError(f"point {tuple(p)} outside {self.nx}x{self.ny} grid")
        k = int(np.rint(wrap_angle(p[2]) / self.dtheta)) % self.ntheta
        return int(np.rint(p[0])), int(np.rint(p[1])), k

    def node(self, i: int, j: int, k: int) -> tuple[float, float, float]:
        return float(i), float(j), (k % self.ntheta) * self.dtheta

    def empty(self, fill=0.0, dtype=float) -> np.ndarray:
        return np.full(self.shape, fill, dtype=dtype)


@dataclass
class Field:
    """A scalar (real or complex) field sampled on a grid."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ConfigError(f"field shape {self.values.shape} != grid {self.grid.shape}")

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)


def antipode(p):
    """Map (x, theta) to (x, theta + pi)."""
    p = np.asarray(p, dtype=float)
    q = p.copy()
    q[..., 2] = wrap_angle(p[..., 2] + np.pi)
    return q


def reflect(values: np.ndarray) -> np.ndarray:
    """Antipodal reflection of a field: (R V)(x, theta) = V(x, theta + pi)."""
    return np.roll(values, -values.shape[2] // 2, axis=2)


def symmetrize(values: np.ndarray) -> np.ndarray:
    return 0.5 * (values + reflect(values))


def interpolate(values: np.ndarray, points, fill=None) -> np.ndarray:
    """Trilinear interpolation with periodic orientation.

    ``points`` has shape ``(..., 3)`` in continuous (x, y, theta).  Points
    outside the spatial extent raise :class:`DomainError` unless ``fill`` is
    given, in which case they receive that value.
    """
    pts = np.asarray(points, dtype=float)
    nx, ny, nt = values.shape
    x, y = pts[..., 0], pts[..., 1]
    s = wrap_angle(pts[..., 2]) / (TWO_PI / nt)
    outside = (x < 0) | (x > nx - 1) | (y < 0) | (y > ny - 1) | ~np.isfinite(x) | ~np.isfinite(y)
    if np.any(outside) and fill is None:
        raise DomainError("interpolation point outside spatial domain")
    xc = np.clip(np.where(outside, 0.0, x), 0, nx - 1)
    yc = np.clip(np.where(outside, 0.0, y), 0, ny - 1)
    i0 = np.minimum(np.floor(xc).astype(int), nx - 2)
    j0 = np.minimum(np.floor(yc).astype(int), ny - 2)
    k0 = np.floor(s).astype(int) % nt
    fx, fy, ft = xc - i0, yc - j0, s - np.floor(s)
    k1 = (k0 + 1) % nt
    out = 0.0
    for di, wx in ((0, 1 - fx), (1, fx)):
        for dj, wy in ((0, 1 - fy), (1, fy)):
            out = out + wx * wy * ((1 - ft) * values[i0 + di, j0 + dj, k0] + ft * values[i0 + di, j0 + dj, k1])
    if fill is not None:
        out = np.where(outside, fill, out)
    return out


def _header(grid: GridSpec, is_complex: bool) -> dict:
    return {"nx": grid.nx, "ny": grid.ny, "ntheta": grid.ntheta, "dtype": "float32", "complex": bool(is_complex)}


def field_to_bytes(field: Field) -> bytes:
    """Serialize: one JSON header line, then little-endian float32 payload.

    The payload runs with theta slowest, then y, then x fastest.  Complex
    fields store interleaved (real, imag) pairs.
    """
    head = json.dumps(_header(field.grid, field.is_complex)).encode() + b"\n"
    arr = np.transpose(field.values, (2, 1, 0))
    if field.is_complex:
        payload = np.ascontiguousarray(arr).astype("<c8").tobytes()
    else:
        payload = np.ascontiguousarray(arr).astype("<f4").tobytes()
    return head + payload


def field_from_bytes(blob: bytes) -> Field:
    nl = blob.index(b"\n")
    head = json.loads(blob[:nl].decode())
    grid = GridSpec(int(head["nx"]), int(head["ny"]), int(head["ntheta"]))
    if head.get("dtype", "float32") != "float32":
        raise ConfigError(f"unsupported dtype {head['dtype']}")
    dt = "<c8" if head.get("complex") else "<f4"
    arr = np.frombuffer(blob[nl + 1:], dtype=dt)
    if arr.size != grid.size:
        raise ConfigError(f"payload has {arr.size} values, header implies {grid.size}")
    vals = arr.reshape(grid.ntheta, grid.ny, grid.nx).transpose(2, 1, 0)
    return Field(grid, np.array(vals))


def save_field(path, field: Field) -> None:
    Path(path).write_bytes(field_to_bytes(field))


def load_field(path) -> Field:
    return field_from_bytes(Path(path).read_bytes())
