import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dcsnakes.errors import ConfigError, DomainError
from dcsnakes.grid import (TWO_PI, Field, GridSpec, antipode, field_from_bytes, field_to_bytes,
                           interpolate, load_field, reflect, save_field, symmetrize, wrap_angle,
                           wrap_signed)

finite = st.floats(-1e3, 1e3, allow_nan=False)


@given(finite)
def test_wrap_ranges(a):
    w = wrap_angle(a)
    s = wrap_signed(a)
    assert 0 <= w < TWO_PI
    assert -np.pi < s <= np.pi + 1e-12
    assert np.isclose(np.cos(w), np.cos(a), atol=1e-9) and np.isclose(np.sin(s), np.sin(a), atol=1e-9)


def test_gridspec_validation():
    with pytest.raises(ConfigError):
        GridSpec(8, 8, 7)
    with pytest.raises(ConfigError):
        GridSpec(1, 8, 8)


def test_index_node_roundtrip():
    g = GridSpec(10, 12, 16)
    for ijk in [(0, 0, 0), (9, 11, 15), (3, 4, 8)]:
        assert g.index_of(g.node(*ijk)) == ijk
    # orientation wraps
    assert g.index_of((2.0, 3.0, TWO_PI - 1e-9)) == (2, 3, 0)
    with pytest.raises(DomainError):
        g.index_of((-0.6, 0, 0))


@given(arrays(float, (3, 4, 8), elements=st.floats(-5, 5)))
def test_reflect_involution_and_symmetrize(v):
    assert np.array_equal(reflect(reflect(v)), v)
    s = symmetrize(v)
    assert np.allclose(reflect(s), s)


def test_antipode():
    p = antipode([1.0, 2.0, 0.5])
    assert np.allclose(p, [1.0, 2.0, 0.5 + np.pi])
    assert np.allclose(antipode(p), [1.0, 2.0, 0.5])


def test_interpolate_nodes_and_linear():
    g = GridSpec(6, 5, 8)
    X, Y, K = np.meshgrid(np.arange(6), np.arange(5), np.arange(8), indexing="ij")
    v = 2.0 * X - 3.0 * Y + 0.0 * K
    pts = np.array([[1.25, 2.5, 0.3], [4.9, 0.1, 6.0], [3.0, 3.0, 0.0]])
    assert np.allclose(interpolate(v, pts), 2 * pts[:, 0] - 3 * pts[:, 1])
    # periodic in theta: between the last and first layers
    w = np.zeros(g.shape)
    w[:, :, 0] = 1.0
    mid = (g.ntheta - 0.5) * g.dtheta
    assert np.isclose(interpolate(w, [[2, 2, mid]])[0], 0.5)


def test_interpolate_outside():
    v = np.zeros((4, 4, 4))
    with pytest.raises(DomainError):
        interpolate(v, [[5.0, 1.0, 0.0]])
    assert interpolate(v, [[5.0, 1.0, 0.0]], fill=-1.0)[0] == -1.0


@pytest.mark.parametrize("cplx", [False, True])
def test_field_roundtrip(tmp_path, cplx):
    rng = np.random.default_rng(0)
    g = GridSpec(5, 7, 4)
    v = rng.random(g.shape).astype(np.float32)
    if cplx:
        v = v + 1j * rng.random(g.shape).astype(np.float32)
    f = Field(g, v)
    back = field_from_bytes(field_to_bytes(f))
    assert back.grid == g and back.is_complex == cplx
    assert np.array_equal(back.values, v)
    save_field(tmp_path / "f.field", f)
    assert np.array_equal(load_field(tmp_path / "f.field").values, v)


def test_field_bad_payload():
    g = GridSpec(3, 3, 4)
    blob = field_to_bytes(Field(g, np.zeros(g.shape)))
    with pytest.raises(ConfigError):
        field_from_bytes(blob[:-4])
    with pytest.raises(ConfigError):
        Field(g, np.zeros((3, 3, 6)))
