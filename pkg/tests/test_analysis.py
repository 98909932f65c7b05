import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dcsnakes.analysis import (CurvePair, collision_radius, cone_endpoints, cone_sample, evaluate, hausdorff,
                               load_pred_csv, masd, match_contours, resample_loop, sphere_fields, sphere_mesh,
                               write_obj, write_rows_csv)
from dcsnakes.errors import DomainError
from oracles import brute_masd_hausdorff


def _star(radii, cx=0.0, cy=0.0):
    t = np.arange(len(radii)) * 2 * np.pi / len(radii)
    return np.stack([cx + np.asarray(radii) * np.cos(t), cy + np.asarray(radii) * np.sin(t)], 1)


def _circle(r, n=200, cx=0.0):
    return _star(np.full(n, r), cx)


star = st.lists(st.floats(3, 10), min_size=5, max_size=12)


@given(star, star, st.floats(-2, 2))
def test_metrics_match_brute_force(ra, rb, shift):
    a, b = _star(ra), _star(rb, cx=shift)
    m, h = masd(a, b), hausdorff(a, b)
    bm, bh = brute_masd_hausdorff(resample_loop(a, 0.02), resample_loop(b, 0.02))
    assert abs(m - bm) < 0.05 and abs(h - bh) < 0.05
    assert m <= h + 1e-12
    assert np.isclose(masd(b, a), m, rtol=1e-6, atol=1e-9)


def test_identical_curves_zero():
    a = _star([4, 5, 6, 5, 4])
    assert masd(a, a) < 1e-9 and hausdorff(a, a) < 1e-9


def test_concentric_circles():
    assert masd(_circle(10), _circle(12)) == pytest.approx(2, abs=0.1)
    assert hausdorff(_circle(10), _circle(12)) == pytest.approx(2, abs=0.1)


def test_degenerate_curves():
    with pytest.raises(DomainError):
        masd(np.zeros((1, 2)), _circle(3))
    with pytest.raises(DomainError):
        masd(np.zeros((4, 2)), _circle(3))


def test_curve_pair_reuse():
    pr = CurvePair.from_curves(_circle(5), _circle(6))
    assert masd(pr) == pytest.approx(1, abs=0.05)


def test_matching_and_evaluate():
    gt = {1: _circle(5), 2: _circle(5, cx=30)}
    pred = {7: _circle(5.5, cx=30), 8: _circle(5.2)}
    rows = {g: p for g, p, _, _ in match_contours(pred, gt)}
    assert rows == {1: 8, 2: 7}
    ev = evaluate(pred, gt)
    assert ev["median_masd"] == pytest.approx(0.35, abs=0.05)
    missing = evaluate({8: _circle(5.2)}, gt)
    assert np.isinf(missing["max_hausdorff"])
    assert all(np.isinf(r[2]) for r in match_contours({}, gt))


def test_load_pred_csv(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("structure,component,index,x,y,theta\n2,1,1,1.0,0.0,0\n2,1,0,0.0,0.0,0\n5,2,0,3.0,3.0,0\n")
    d = load_pred_csv(p)
    assert sorted(d) == [2, 5]
    assert np.array_equal(d[2], [[0, 0], [1, 0]])


@pytest.fixture(scope="module")
def dc_small():
    return sphere_fields("dc", 1.0, n=32, ntheta=16, scale=5.0)


def test_sphere_fields_symmetry(dc_small):
    W = dc_small.combined
    c = dc_small.center
    assert W[c[0], c[1], 0] == 0 and W[c[0], c[1], 8] == 0
    # the combined field is symmetric under theta -> theta + pi
    assert np.allclose(W, np.roll(W, 8, axis=2))
    with pytest.raises(ValueError):
        sphere_fields("nope")


def test_sphere_mesh_edge_radii(dc_small, tmp_path):
    meshes = sphere_mesh(dc_small, [0.0, 1.5, 1e6])
    by = {(m.radius, m.tag): m for m in meshes}
    assert len(by[(0.0, "combined")].vertices) == 1 and len(by[(0.0, "combined")].faces) == 0
    assert by[(1e6, "combined")].empty
    mid = by[(1.5, "combined")]
    assert len(mid.faces) > 0 and mid.faces.max() < len(mid.vertices)
    write_obj(tmp_path / "s.obj", meshes)
    lines = (tmp_path / "s.obj").read_text().splitlines()
    assert lines[0] == "mtllib s.mtl" and (tmp_path / "s.mtl").exists()
    nv = sum(l.startswith("v ") for l in lines)
    nf = sum(l.startswith("f ") for l in lines)
    assert nv == sum(len(m.vertices) for m in meshes) and nf == sum(len(m.faces) for m in meshes)
    idx = [int(t) for l in lines if l.startswith("f ") for t in l.split()[1:]]
    assert min(idx) >= 1 and max(idx) <= nv


def test_collision_radius_finite(dc_small):
    R, where = collision_radius(dc_small)
    assert np.isfinite(R) and R > 0


def test_cone_straight_ahead_member(tmp_path):
    ends = cone_endpoints([1.5], [0.0, np.pi], [0.0])
    rows = cone_sample(1.0, ends, n=40, ntheta=16, scale=8.0)
    assert rows[0]["member"] and rows[0]["consistent"]
    assert rows[0]["dc"] == pytest.approx(1.5, rel=1e-6)
    # straight behind is reached by the reversed line: same distance, no cusp
    assert rows[1]["dc"] == pytest.approx(1.5, rel=1e-6)
    write_rows_csv(tmp_path / "r.csv", rows)
    assert (tmp_path / "r.csv").read_text().splitlines()[0].startswith("x,y,theta,member")
    with pytest.raises(DomainError):
        cone_sample(1.0, [[10.0, 0, 0]], n=40, ntheta=16, scale=8.0)
