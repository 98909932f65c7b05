"""Orientation scores with cake wavelets.

Each wavelet is a one-sided wedge in the Fourier domain: a quadratic
B-spline in angle times a raised-cosine radial low-pass.  With ``N_o``
base orientations and overlap factor ``o`` there are ``N_o * o`` wavelets
spaced 2 pi / (N_o o) apart, each covering a 2 pi / N_o cone.  Because the
wedges are one-sided, the real part of a filter is even (line detector) and
the imaginary part is odd (edge detector).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError


def bspline2(x):
    """Centred quadratic B-spline, support [-1.5, 1.5]."""
    x = np.abs(x)
    return np.where(x < 0.5, 0.75 - x**2, np.where(x < 1.5, 0.5 * (x - 1.5) ** 2, 0.0))


def radial_window(rho, cutoff: float = 0.8, inflection: float = 0.5):
    """1 below ``inflection``, raised cosine down to 0 at ``cutoff``.

    ``rho`` is the frequency magnitude as a fraction of Nyquist.
    """
    if not 0 < inflection < cutoff:
        raise ConfigError(f"need 0 < inflection < cutoff, got {inflection}, {cutoff}")
    t = np.clip((rho - inflection) / (cutoff - inflection), 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * t))


@dataclass
class WaveletStack:
    filters: np.ndarray       # (n, s, s) complex spatial filters, centred
    fourier: np.ndarray       # (n, s, s) real Fourier wedges, DC at [0, 0]
    thetas: np.ndarray
    n_orientations: int
    overlap: int
    gain: float               # value of sum_k psi_hat_k in the pass band

    @property
    def ntheta(self) -> int:
        return len(self.thetas)

    @property
    def size(self) -> int:
        return self.filters.shape[-1]


def _freq_grid(s):
    w = np.fft.fftfreq(s) * 2 * np.pi
    wx, wy = np.meshgrid(w, w, indexing="ij")
    return wx, wy


def build_cake_wavelets(size: int = 33, n_orientations: int = 12, overlap: int = 4,
                        cutoff: float = 0.8, inflection: float = 0.5) -> WaveletStack:
    """Cake wavelet stack of ``n_orientations * overlap`` filters of odd ``size``.

    Normalised so that sum_k |psi_hat_k|^2 is 1 in the pass band; the DC bin
    is shared equally by all orientations.
    """
    if size % 2 == 0 or size < 5:
        raise ConfigError(f"filter size must be odd and >= 5, got {size}")
    if n_orientations < 2 or n_orientations % 2 or overlap < 1:
        raise ConfigError(f"need an even n_orientations >= 2 and overlap >= 1, got {n_orientations}, {overlap}")
    n = n_orientations * overlap
    width = 2 * np.pi / n_orientations
    thetas = np.arange(n) * 2 * np.pi / n
    wx, wy = _freq_grid(size)
    rho = np.hypot(wx, wy) / np.pi
    phi = np.arctan2(wy, wx)
    M = radial_window(rho, cutoff, inflection)
    # sum of squared B-spline shifts at spacing 1/overlap is nearly constant
    xs = np.linspace(0, 1, 257)
    s2 = np.mean(sum(bspline2(xs - j / overlap) ** 2 for j in range(-4 * overlap, 4 * overlap + 1)))
    norm = 1.0 / np.sqrt(s2)
    gain = overlap * norm
    fourier = np.empty((n, size, size))
    for k, th in enumerate(thetas):
        # wedge centred on the normal direction th + pi/2 picks up structures along th
        d = np.mod(phi - th - np.pi / 2 + np.pi, 2 * np.pi) - np.pi
        fourier[k] = M * bspline2(d / width) * norm
    fourier[:, 0, 0] = gain * M[0, 0] / n
    filters = np.fft.fftshift(np.fft.ifft2(fourier, axes=(1, 2)), axes=(1, 2))
    return WaveletStack(filters, fourier, thetas, n_orientations, overlap, float(gain))


def _pad_width(stack: WaveletStack) -> int:
    return stack.size // 2


def _filter_spectra(stack: WaveletStack, shape):
    """Fourier transforms of the spatial filters embedded in a grid of ``shape``."""
    s = stack.size
    h = s // 2
    big = np.zeros((stack.ntheta,) + tuple(shape), dtype=complex)
    big[:, :s, :s] = stack.filters
    # move the filter centre to the origin
    big = np.roll(big, (-h, -h), axis=(1, 2))
    return np.fft.fft2(big, axes=(1, 2))


def lift(image: np.ndarray, stack: WaveletStack) -> np.ndarray:
    """Orientation score U(x, y, theta_k), shape (nx, ny, ntheta), complex.

    The image is mirror-extended by the filter half-width and filtered with
    FFTs, so the output is periodic only in the padding.
    """
    f = np.asarray(image, dtype=float)
    if f.ndim != 2:
        raise DomainError("lift expects a 2D image")
    h = _pad_width(stack)
    if min(f.shape) <= h:
        raise DomainError(f"image {f.shape} too small for {stack.size}x{stack.size} filters")
    fp = np.pad(f, h, mode="symmetric")
    F = np.fft.fft2(fp)
    spectra = _filter_spectra(stack, fp.shape)
    U = np.fft.ifft2(spectra * F[None], axes=(1, 2))[:, h:h + f.shape[0], h:h + f.shape[1]]
    return np.ascontiguousarray(np.moveaxis(U, 0, -1))


def reconstruct(U: np.ndarray, stack: WaveletStack, value_range=None) -> np.ndarray:
    """Approximate inverse: real part of the sum over orientations.

    Divides by the pass-band gain; if ``value_range`` is given the result is
    additionally rescaled to that (min, max).
    """
    rec = np.real(U.sum(axis=2)) / stack.gain
    if value_range is not None:
        lo, hi = value_range
        r0, r1 = rec.min(), rec.max()
        if r1 > r0:
            rec = lo + (rec - r0) * (hi - lo) / (r1 - r0)
    return rec


def partition_sum(stack: WaveletStack) -> np.ndarray:
    """sum_k |psi_hat_k|^2 on the filter's frequency grid."""
    return np.sum(np.abs(stack.fourier) ** 2, axis=0)


def log_rescale(image: np.ndarray) -> np.ndarray:
    """Logarithmic intensity transform followed by rescaling to [0, 1]."""
    f = np.asarray(image, dtype=float)
    f = f - f.min()
    g = np.log1p(f)
    span = g.max() - g.min()
    return (g - g.min()) / span if span > 0 else np.zeros_like(g)
