import numpy as np
import pytest

from dcsnakes.errors import ConfigError, DomainError
from dcsnakes.liftscore import (bspline2, build_cake_wavelets, lift, log_rescale, partition_sum,
                                radial_window, reconstruct)


@pytest.fixture(scope="module")
def stack():
    return build_cake_wavelets(33, 12, 4)


def test_bspline_partition_of_unity():
    x = np.linspace(-3, 3, 601)
    total = sum(bspline2(x - j) for j in range(-5, 6))
    assert np.allclose(total, 1.0)


def test_radial_window():
    assert radial_window(0.3) == 1.0 and radial_window(0.9) == 0.0
    assert np.isclose(radial_window(0.65), 0.5)
    with pytest.raises(ConfigError):
        radial_window(0.5, cutoff=0.4, inflection=0.5)


def test_stack_layout(stack):
    assert stack.ntheta == 48
    assert np.allclose(np.diff(stack.thetas), 2 * np.pi / 48)
    assert stack.filters.shape == (48, 33, 33)


def test_partition_in_pass_band(stack):
    s = stack.size
    w = np.fft.fftfreq(s) * 2
    rho = np.hypot(*np.meshgrid(w, w, indexing="ij"))
    band = (rho > 0) & (rho < 0.5)
    assert np.allclose(partition_sum(stack)[band], 1.0, atol=1e-3)


@pytest.mark.parametrize("kw", [dict(size=32), dict(size=3), dict(n_orientations=7), dict(overlap=0)])
def test_bad_stack(kw):
    with pytest.raises(ConfigError):
        build_cake_wavelets(**kw)


def test_lift_errors(stack):
    with pytest.raises(DomainError):
        lift(np.zeros((4, 4, 4)), stack)
    with pytest.raises(DomainError):
        lift(np.zeros((10, 40)), stack)


def test_zero_image(stack):
    U = lift(np.zeros((40, 40)), stack)
    assert U.shape == (40, 40, 48) and np.all(U == 0)


def test_constant_reconstructs(stack):
    U = lift(np.full((40, 36), 0.7), stack)
    assert np.allclose(reconstruct(U, stack), 0.7, atol=1e-6)


def test_smooth_image_reconstructs(stack):
    x, y = np.meshgrid(np.arange(48), np.arange(44), indexing="ij")
    f = np.cos(2 * np.pi * x / 16) * np.sin(2 * np.pi * y / 22) + 0.3
    rec = reconstruct(lift(f, stack), stack)
    assert np.abs(rec - f)[8:-8, 8:-8].max() < 1e-3
    r = reconstruct(lift(f, stack), stack, value_range=(0, 1))
    assert np.isclose(r.min(), 0) and np.isclose(r.max(), 1)


def test_line_along_x_peaks_at_layer_zero(stack):
    f = np.zeros((48, 48))
    f[:, 24] = 1.0                       # line along x (axis 0)
    U = lift(f, stack)
    k = int(np.argmax(np.real(U[24, 24])))
    assert k % 24 == 0


def test_step_edge_in_imaginary_part(stack):
    f = np.zeros((48, 48))
    f[:, 24:] = 1.0                      # edge along x, step in y
    U = lift(f, stack)
    im = np.abs(np.imag(U[24, 23:25])).max(axis=0)
    assert int(np.argmax(im)) % 24 == 0
    # real part (line detector) is weak on a pure step
    assert np.abs(np.real(U[24, 24, 0])) < np.abs(np.imag(U[24, 23:25, 0])).max()


def test_rotated_line_follows_orientation(stack):
    f = np.zeros((64, 64))
    f[32, :] = 1.0                       # line along y: theta = pi/2 -> layer 12
    U = lift(f, stack)
    assert int(np.argmax(np.real(U[32, 32]))) % 24 == 12


def test_log_rescale():
    f = np.array([[0.0, 1.0], [3.0, 7.0]])
    g = log_rescale(f)
    assert g.min() == 0 and g.max() == 1
    assert np.all(np.diff(g.ravel()[np.argsort(f.ravel())]) > 0)
    assert np.all(log_rescale(np.ones((3, 3))) == 0)
