import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dcsnakes.analysis import hausdorff, masd
from dcsnakes.costfield import (CostParams, component_params, connected_components, cost_from_measure,
                                group_cost, line_measure)
from dcsnakes.grid import wrap_signed
from dcsnakes.liftscore import build_cake_wavelets, lift
from dcsnakes.snakes import (_runs, count_switches, horizontality_deviation, initial_contours, locate_edge,
                             resample_closed, segment_contours, smooth_axial, split_by_horizontality)
from dcsnakes.tracking import Curve

XI = np.sqrt(0.2 / 7)


def _circle(n=100, r=10.0, shift=0.0):
    t = np.arange(n) * 2 * np.pi / n
    return Curve(20 + r * np.cos(t), 20 + r * np.sin(t), np.mod(t + np.pi / 2 + shift, 2 * np.pi))


def test_resample_closed_uniform():
    sq = np.array([[0, 0], [4, 0], [4, 4], [0, 4]], float)
    r = resample_closed(sq, 0.5)
    assert len(r) == 32
    d = np.linalg.norm(np.diff(np.vstack([r, r[:1]]), axis=0), axis=1)
    assert np.allclose(d, 0.5)


@given(st.floats(0, 2 * np.pi), st.integers(1, 9))
def test_smooth_axial_constant_and_representative(theta, window):
    th = np.full(20, theta)
    out = smooth_axial(th, window)
    assert np.allclose(np.cos(out - theta), 1, atol=1e-9)


def test_smooth_axial_keeps_representatives():
    th = np.array([0.1, 0.1 + np.pi, 0.1, 0.1 + np.pi, 0.1])
    out = smooth_axial(th, 3)
    assert np.allclose(np.abs(wrap_signed(out - th)), 0, atol=1e-9)


def test_horizontality_of_circle():
    assert np.allclose(horizontality_deviation(_circle()), 0, atol=1e-3)
    assert np.allclose(horizontality_deviation(_circle(shift=np.pi / 2)), np.pi / 2, atol=1e-3)
    assert np.allclose(horizontality_deviation(_circle(shift=np.pi)), np.pi, atol=1e-3)


def test_split_and_switches():
    c = _circle()
    c.theta[20:40] += 0.5                  # a lifted run disagreeing with the tangent
    segs = split_by_horizontality(c)
    assert sorted(s.mode for s in segs) == ["geodesic", "spatial"]
    assert count_switches(segs) == 2
    assert sorted(np.concatenate([s.indices for s in segs]).tolist()) == list(range(100))
    geo = next(s for s in segs if s.mode == "geodesic")
    assert set(geo.indices.tolist()) == set(range(20, 40))
    # linked in a ring
    assert all(segs[s.next].prev == k for k, s in enumerate(segs))


def test_split_short_spatial_runs_become_geodesic():
    c = _circle()
    c.theta[:] += 0.5
    c.theta[50:52] -= 0.5                  # two agreeing samples only
    assert [s.mode for s in split_by_horizontality(c, min_spatial=3)] == ["geodesic"]
    assert count_switches(split_by_horizontality(c, min_spatial=3)) == 0


@given(st.lists(st.booleans(), min_size=1, max_size=30))
def test_runs_cover_loop(flags):
    f = np.array(flags)
    runs = _runs(f)
    idx = np.concatenate([np.arange(s, e) % len(f) for s, e in runs])
    assert sorted(idx.tolist()) == list(range(len(f)))
    for s, e in runs:
        assert len(set(f[np.arange(s, e) % len(f)])) == 1


def test_locate_edge_on_blurred_step():
    lam = np.arange(-8, 8.125, 0.25)

    def prof(s):
        # gamma-normalised gradient magnitude of a unit step at lambda = 1.3
        return s**0.5 * np.exp(-((lam - 1.3) ** 2) / (2 * (s**2 + 1.0))) / np.sqrt(s**2 + 1.0)

    d = locate_edge(prof, lam, (1.0, 2.0, 4.0))
    assert abs(d - 1.3) < 0.05
    assert locate_edge(lambda s: np.zeros_like(lam), lam, (1.0, 2.0)) is None


def _bars_scene():
    f = np.full((56, 80), 0.08)
    f[14:42, 14:24] = 0.6
    f[14:42, 54:64] = 0.6
    U = lift(f, build_cake_wavelets(33))
    cp = component_params(10)
    V = line_measure(U, cp.sigma_s, cp.sigma_a)
    L = connected_components(V)
    tp = CostParams()
    C = cost_from_measure(line_measure(U, tp.sigma_s, tp.sigma_a), tp)
    gts = [np.array([[13.5, y0 - 0.5], [41.5, y0 - 0.5], [41.5, y0 + 9.5], [13.5, y0 + 9.5]]) for y0 in (14, 54)]
    return U, V, L, group_cost(C, L), gts


@pytest.fixture(scope="module")
def bars():
    return _bars_scene()


def test_initial_contours_ccw_per_component(bars):
    U, V, L, G, _ = bars
    init = initial_contours(L, V)
    assert L.n == 2 and [c.component for c in init] == [1, 2]
    for c in init:
        x, y = c.curve.x, c.curve.y
        assert 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) > 0
        # lifted orientation agrees with the tangent on most of the outline
        assert np.mean(horizontality_deviation(c.curve) < np.pi / 2) > 0.9


def test_segmentation_recovers_bars(bars):
    U, V, L, G, gts = bars
    init = initial_contours(L, V)
    res = segment_contours(init, U, G, XI, radius=15, margin=10)
    assert res.stats["contours"] == 2 and res.stats["flagged_gaps"] == 0
    for c, gt in zip(res.contours, gts):
        assert masd(c.points[:, :2], gt) < 1.0
        assert hausdorff(c.points[:, :2], gt) < 4.0
        assert {0, 1} <= set(c.modes.tolist())


def test_workers_do_not_change_output(bars):
    U, V, L, G, _ = bars
    init = initial_contours(L, V)
    a = segment_contours(init, U, G, XI, radius=15, margin=10, workers=1)
    b = segment_contours(init, U, G, XI, radius=15, margin=10, workers=2)
    for ca, cb in zip(a.contours, b.contours):
        assert np.array_equal(ca.points, cb.points) and np.array_equal(ca.modes, cb.modes)
