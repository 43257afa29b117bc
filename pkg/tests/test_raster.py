import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from sdrgen.render.raster import clip_near, coverage_counts, new_buffers, rasterize

W, H = 48, 32
F, CX, CY = 40.0, 24.0, 16.0


def screen_tri(pts, z=5.0):
    """Camera-space triangle whose vertices project to the given pixel coordinates at depth z."""
    return np.array([[(x - CX) / F * z, -(y - CY) / F * z, z] for x, y in pts], dtype=float)


def counts(tris, starts):
    return coverage_counts(np.ascontiguousarray(tris), np.asarray(starts, dtype=np.int64), F, F, CX, CY, 0.1, W, H)


def test_clip_all_in_front():
    out = np.empty((4, 3))
    assert clip_near(np.array([[0, 0, 1.0], [1, 0, 1.0], [0, 1, 2.0]]), 0.1, out) == 3


def test_clip_all_behind():
    out = np.empty((4, 3))
    assert clip_near(np.array([[0, 0, -1.0], [1, 0, -1.0], [0, 1, 0.05]]), 0.1, out) == 0


def test_clip_one_behind_gives_quad():
    out = np.empty((4, 3))
    n = clip_near(np.array([[0, 0, -1.0], [1, 0, 2.0], [0, 1, 2.0]]), 0.1, out)
    assert n == 4
    assert np.all(out[:n, 2] >= 0.1 - 1e-12)


def test_two_behind_gives_triangle():
    out = np.empty((4, 3))
    n = clip_near(np.array([[0, 0, -1.0], [1, 0, -2.0], [0, 1, 2.0]]), 0.1, out)
    assert n == 3


def test_pixel_center_sampling():
    # a 4x4 axis-aligned square on pixel boundaries covers exactly 16 pixels
    quad = [(10, 10), (14, 10), (14, 14), (10, 14)]
    tris = np.stack([screen_tri([quad[0], quad[1], quad[2]]), screen_tri([quad[0], quad[2], quad[3]])])
    depth, idx = new_buffers(W, H)
    rasterize(tris, F, F, CX, CY, 0.1, depth, idx)
    ys, xs = np.nonzero(idx >= 0)
    assert len(xs) == 16
    assert (xs.min(), xs.max(), ys.min(), ys.max()) == (10, 13, 10, 13)
    np.testing.assert_allclose(depth[idx >= 0], 5.0)


def test_depth_test_keeps_nearest_regardless_of_order():
    sq = [(0, 0), (W, 0), (W, H)]
    near, far = screen_tri(sq, z=3.0), screen_tri(sq, z=9.0)
    for order in ((near, far), (far, near)):
        depth, idx = new_buffers(W, H)
        rasterize(np.stack(order), F, F, CX, CY, 0.1, depth, idx)
        hit = idx >= 0
        np.testing.assert_allclose(depth[hit], 3.0)
        winner = 0 if order[0] is near else 1
        assert np.all(idx[hit] == winner)


def test_equal_depth_first_drawn_wins():
    t = screen_tri([(0, 0), (W, 0), (0, H)])
    depth, idx = new_buffers(W, H)
    rasterize(np.stack([t, t]), F, F, CX, CY, 0.1, depth, idx)
    assert set(np.unique(idx)) <= {-1, 0}


def test_perspective_correct_depth():
    # a plane tilted in depth: z = 4 + 0.1 * camera x
    tri = np.array([[-3.0, -2.0, 3.7], [3.0, -2.0, 4.3], [0.0, 3.0, 4.0]])
    depth, idx = new_buffers(W, H)
    rasterize(tri[None], F, F, CX, CY, 0.1, depth, idx)
    j, i = np.nonzero(idx == 0)
    # depth of the plane along the ray through each pixel center
    rx = (i + 0.5 - CX) / F
    expected = 4.0 / (1.0 - 0.1 * rx)
    np.testing.assert_allclose(depth[j, i], expected, rtol=1e-9)


def test_behind_camera_draws_nothing():
    tri = np.array([[0.0, 0.0, -1.0], [1.0, 0.0, -2.0], [0.0, 1.0, -3.0]])
    depth, idx = new_buffers(W, H)
    rasterize(tri[None], F, F, CX, CY, 0.1, depth, idx)
    assert np.all(idx == -1) and np.all(np.isinf(depth))


def test_full_screen_quad_is_watertight():
    quad = [(-5, -5), (W + 5, -5), (W + 5, H + 5), (-5, H + 5)]
    tris = np.stack([screen_tri([quad[0], quad[1], quad[2]]), screen_tri([quad[0], quad[2], quad[3]])])
    assert counts(tris, [0, 1, 2]).sum() == W * H
    assert counts(tris, [0, 2])[0] == W * H


coord = st.floats(-10, 60, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(a=st.tuples(coord, coord), b=st.tuples(coord, coord), c=st.tuples(coord, coord), d=st.tuples(coord, coord),
       z=st.floats(1, 20))
def test_shared_edge_covered_exactly_once(a, b, c, d, z):
    # two triangles sharing edge a-c: no pixel is counted twice, none dropped
    t1, t2 = screen_tri([a, b, c], z), screen_tri([a, c, d], z)
    tris = np.stack([t1, t2])
    separate = counts(tris, [0, 1, 2])
    union = counts(tris, [0, 2])[0]
    # when b and d are on opposite sides of a-c the two triangles are disjoint except for the edge
    side = lambda p: (c[0] - a[0]) * (p[1] - a[1]) - (c[1] - a[1]) * (p[0] - a[0])
    if side(b) * side(d) < 0:
        assert separate.sum() == union


def test_coverage_counts_groups_independent():
    t = screen_tri([(0, 0), (W, 0), (0, H)])
    c = counts(np.stack([t, t, t]), [0, 1, 3])
    assert c[0] == c[1] > 0
