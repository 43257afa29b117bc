"""Z-buffered triangle rasterization in camera space.

Triangles are clipped against the near plane, projected, and filled with edge
functions sampled at pixel centers.  Ties on an edge go to the triangle for
which the edge is a top or left edge, so two triangles sharing an edge never
both claim a pixel.  Depth is the planar camera Z, recovered from the
screen-space interpolation of 1/Z, and the depth test is strict: on equal
depth the earlier triangle keeps the pixel.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np


@nb.njit(cache=True)
def clip_near(tri, near, out):
    """Clip one camera-space triangle to z >= near; writes up to 4 vertices to ``out``."""
    n = 0
    for i in range(3):
        a = tri[i]
        b = tri[(i + 1) % 3]
        a_in = a[2] >= near
        b_in = b[2] >= near
        if a_in:
            out[n, 0], out[n, 1], out[n, 2] = a[0], a[1], a[2]
            n += 1
        if a_in != b_in:
            t = (near - a[2]) / (b[2] - a[2])
            out[n, 0] = a[0] + (b[0] - a[0]) * t
            out[n, 1] = a[1] + (b[1] - a[1]) * t
            out[n, 2] = near
            n += 1
    return n


@nb.njit(cache=True, inline="always")
def _top_left(ax, ay, bx, by):
    dy = by - ay
    return dy < 0.0 or (dy == 0.0 and bx - ax > 0.0)


@nb.njit(cache=True)
def _fill(x0, y0, z0, x1, y1, z1, x2, y2, z2, width, height, tid, depth, tri_idx, count_mask):
    """Scan one screen triangle.

    With ``count_mask`` of size > 0 the call only marks coverage in the mask and
    returns the number of newly marked pixels; otherwise it depth-tests into
    ``depth``/``tri_idx``.
    """
    area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
    if area == 0.0 or not math.isfinite(area):
        return 0
    if area < 0.0:
        x1, y1, z1, x2, y2, z2 = x2, y2, z2, x1, y1, z1
        area = -area
    tl0 = _top_left(x1, y1, x2, y2)
    tl1 = _top_left(x2, y2, x0, y0)
    tl2 = _top_left(x0, y0, x1, y1)
    i_lo = max(0, int(math.ceil(min(x0, x1, x2) - 0.5)))
    i_hi = min(width - 1, int(math.floor(max(x0, x1, x2) - 0.5)))
    j_lo = max(0, int(math.ceil(min(y0, y1, y2) - 0.5)))
    j_hi = min(height - 1, int(math.floor(max(y0, y1, y2) - 0.5)))
    iz0, iz1, iz2 = 1.0 / z0, 1.0 / z1, 1.0 / z2
    counting = count_mask.shape[0] > 0
    added = 0
    for j in range(j_lo, j_hi + 1):
        py = j + 0.5
        for i in range(i_lo, i_hi + 1):
            px = i + 0.5
            w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
            if w0 < 0.0 or (w0 == 0.0 and not tl0):
                continue
            w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
            if w1 < 0.0 or (w1 == 0.0 and not tl1):
                continue
            w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
            if w2 < 0.0 or (w2 == 0.0 and not tl2):
                continue
            if counting:
                if count_mask[j, i] == 0:
                    count_mask[j, i] = 1
                    added += 1
                continue
            z = 1.0 / ((w0 * iz0 + w1 * iz1 + w2 * iz2) / area)
            if z < depth[j, i]:
                depth[j, i] = z
                tri_idx[j, i] = tid
    return added


@nb.njit(cache=True)
def _raster_tri(tri, tid, fx, fy, cx, cy, near, width, height, depth, tri_idx, count_mask, poly):
    if tri[0, 2] < near and tri[1, 2] < near and tri[2, 2] < near:
        return 0
    n = clip_near(tri, near, poly)
    if n < 3:
        return 0
    sx = np.empty(4)
    sy = np.empty(4)
    for k in range(n):
        sx[k] = cx + fx * poly[k, 0] / poly[k, 2]
        sy[k] = cy - fy * poly[k, 1] / poly[k, 2]
    added = 0
    for k in range(1, n - 1):
        added += _fill(sx[0], sy[0], poly[0, 2], sx[k], sy[k], poly[k, 2], sx[k + 1], sy[k + 1], poly[k + 1, 2],
                       width, height, tid, depth, tri_idx, count_mask)
    return added


@nb.njit(cache=True)
def rasterize(tris, fx, fy, cx, cy, near, depth, tri_idx):
    """Depth-test every camera-space triangle of ``tris`` (N, 3, 3) in order, in place."""
    height, width = depth.shape
    poly = np.empty((4, 3))
    no_mask = np.zeros((0, 0), dtype=np.uint8)
    for t in range(tris.shape[0]):
        _raster_tri(tris[t], t, fx, fy, cx, cy, near, width, height, depth, tri_idx, no_mask, poly)


@nb.njit(cache=True)
def coverage_counts(tris, starts, fx, fy, cx, cy, near, width, height):
    """Pixels covered by each group ``tris[starts[g]:starts[g+1]]`` drawn alone, no depth test."""
    n_groups = starts.shape[0] - 1
    counts = np.zeros(n_groups, dtype=np.int64)
    mask = np.zeros((height, width), dtype=np.uint8)
    dummy_depth = np.zeros((1, 1))
    dummy_idx = np.zeros((1, 1), dtype=np.int32)
    poly = np.empty((4, 3))
    for g in range(n_groups):
        total = 0
        for t in range(starts[g], starts[g + 1]):
            total += _raster_tri(tris[t], t, fx, fy, cx, cy, near, width, height, dummy_depth, dummy_idx, mask,
                                 poly)
        counts[g] = total
        if total > 0:
            mask[:, :] = 0
    return counts


def new_buffers(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    return np.full((height, width), np.inf), np.full((height, width), -1, dtype=np.int32)
