"""Per-object ground truth from rendered buffers and scene geometry.

Boxes use pixel indices: a visible box ``(left, top, right, bottom)`` is
inclusive, so a one-pixel object at column 7, row 3 has box ``(7, 3, 7, 3)``.
Amodal boxes are continuous image coordinates of the projected, near-clipped
mesh and may extend past the image.  3D quantities are reported in the KITTI
camera convention: x right, y down, z forward, location at the bottom center.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numba as nb
import numpy as np

from .render.camera import Camera
from .render.raster import clip_near
from .render.renderer import SceneMesh, solo_pixel_counts, to_camera

KITTI_TYPES = {"car": "Car", "truck": "Truck", "pedestrian": "Pedestrian", "cyclist": "Cyclist"}
BUCKETS = ("Easy", "Moderate", "Hard")


def kitti_type(cls: str) -> str:
    return KITTI_TYPES.get(cls) or "".join(w.capitalize() for w in cls.split("_"))


# -- 2D boxes -------------------------------------------------------------------------

def visible_bbox(instance: np.ndarray, instance_id: int) -> tuple[int, int, int, int] | None:
    rows = np.flatnonzero((instance == instance_id).any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero((instance == instance_id).any(axis=0))
    return int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1])


@nb.njit(cache=True)
def _visible_stats(instance, n_ids):
    count = np.zeros(n_ids + 1, dtype=np.int64)
    box = np.empty((n_ids + 1, 4), dtype=np.int64)
    box[:, 0] = box[:, 1] = 1 << 40
    box[:, 2] = box[:, 3] = -1
    h, w = instance.shape
    for j in range(h):
        for i in range(w):
            k = instance[j, i]
            if k == 0 or k > n_ids:
                continue
            count[k] += 1
            if i < box[k, 0]:
                box[k, 0] = i
            if j < box[k, 1]:
                box[k, 1] = j
            if i > box[k, 2]:
                box[k, 2] = i
            if j > box[k, 3]:
                box[k, 3] = j
    return count, box


def visible_stats(instance: np.ndarray, n_ids: int) -> dict[int, tuple[int, tuple[int, int, int, int] | None]]:
    """Pixel count and visible box for ids 1..n_ids in one pass."""
    count, box = _visible_stats(instance, int(n_ids))
    return {k: (int(count[k]), tuple(int(v) for v in box[k]) if count[k] else None) for k in range(1, n_ids + 1)}


@nb.njit(cache=True)
def _clipped_extent(tris, near, fx, fy, cx, cy):
    lo_x, lo_y, hi_x, hi_y = np.inf, np.inf, -np.inf, -np.inf
    poly = np.empty((4, 3))
    for t in range(tris.shape[0]):
        n = clip_near(tris[t], near, poly)
        if n < 3:
            continue
        for k in range(n):
            x = cx + fx * poly[k, 0] / poly[k, 2]
            y = cy - fy * poly[k, 1] / poly[k, 2]
            lo_x, lo_y = min(lo_x, x), min(lo_y, y)
            hi_x, hi_y = max(hi_x, x), max(hi_y, y)
    return lo_x, lo_y, hi_x, hi_y


def amodal_bbox(camera: Camera, triangles_world: np.ndarray) -> tuple[float, float, float, float] | None:
    """Box over the projected mesh after clipping its triangles at the near plane."""
    tris = to_camera(np.asarray(triangles_world, dtype=float), camera)
    box = _clipped_extent(tris, camera.near, camera.fx, camera.fy, camera.cx, camera.cy)
    if not math.isfinite(box[0]):
        return None
    return tuple(float(v) for v in box)


def clip_box(box, width: int, height: int) -> tuple[float, float, float, float]:
    l, t, r, b = box
    return max(l, 0.0), max(t, 0.0), min(r, float(width)), min(b, float(height))


def box_area(box) -> float:
    l, t, r, b = box
    return max(r - l, 0.0) * max(b - t, 0.0)


def truncation_fraction(amodal, width: int, height: int) -> float:
    """1 - clipped area / amodal area; 0 for a zero-area box."""
    area = box_area(amodal)
    if area <= 0.0:
        return 0.0
    return float(min(max(1.0 - box_area(clip_box(amodal, width, height)) / area, 0.0), 1.0))


def occlusion_fraction(visible_pixels: int, solo_pixels: int) -> float:
    if solo_pixels <= 0:
        return 0.0
    return float(min(max(1.0 - visible_pixels / solo_pixels, 0.0), 1.0))


def occlusion_state(fraction: float, cuts: tuple[float, float] = (0.05, 0.50)) -> int:
    if fraction <= cuts[0]:
        return 0
    return 1 if fraction <= cuts[1] else 2


# -- 3D boxes ---------------------------------------------------------------------------

def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


@dataclass(frozen=True)
class Box3D:
    center: tuple[float, float, float]    # geometric center, camera frame (y down)
    location: tuple[float, float, float]  # bottom center, camera frame (y down)
    dims: tuple[float, float, float]      # length, width, height
    rotation_y: float                     # radians about the camera y axis
    alpha: float
    corners: np.ndarray = field(repr=False, compare=False)  # (8, 3)

    @property
    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        return self.corners.min(axis=0), self.corners.max(axis=0)


def bbox_3d(dims, position, yaw_deg: float, camera: Camera) -> Box3D:
    """Oriented and axis-aligned boxes of an object whose local bounds are [-L/2, L/2] x [-W/2, W/2] x [0, H]."""
    L, W, H = dims
    c, s = math.cos(math.radians(yaw_deg)), math.sin(math.radians(yaw_deg))
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    xs, ys, zs = np.meshgrid([-L / 2, L / 2], [-W / 2, W / 2], [0.0, H], indexing="ij")
    local = np.stack([xs.ravel(), ys.ravel(), zs.ravel()], axis=1)
    pos = np.asarray(position, dtype=float)
    flip = np.array([1.0, -1.0, 1.0])
    corners = camera.world_to_camera(local @ rot.T + pos) * flip
    bottom = camera.world_to_camera(pos) * flip
    center = camera.world_to_camera(pos + np.array([0.0, 0.0, H / 2])) * flip
    hx, _, hz = camera.R @ np.array([c, s, 0.0])
    ry = math.atan2(-hz, hx)
    alpha = _wrap(ry - math.atan2(center[0], center[2]))
    return Box3D(center=tuple(center.tolist()), location=tuple(bottom.tolist()), dims=(L, W, H),
                 rotation_y=_wrap(ry), alpha=alpha, corners=corners)


# -- labels ------------------------------------------------------------------------------

@dataclass(frozen=True)
class DifficultyThresholds:
    """Per bucket: (minimum box height px, maximum occlusion state, maximum truncation)."""

    easy: tuple[float, int, float] = (40.0, 0, 0.15)
    moderate: tuple[float, int, float] = (25.0, 1, 0.30)
    hard: tuple[float, int, float] = (25.0, 2, 0.50)

    def __post_init__(self):
        for a, b in ((self.easy, self.moderate), (self.moderate, self.hard)):
            if not (b[0] <= a[0] and b[1] >= a[1] and b[2] >= a[2]):
                raise ValueError("difficulty buckets must nest: each bucket at most as strict as the previous")

    def items(self):
        return zip(BUCKETS, (self.easy, self.moderate, self.hard))


@dataclass(frozen=True)
class ObjectLabel:
    instance_id: int
    cls: str
    visible_bbox: tuple[int, int, int, int] | None
    amodal_bbox: tuple[float, float, float, float] | None
    truncation: float
    occlusion_fraction: float
    occlusion_state: int
    box3d: Box3D
    visible_pixels: int = 0
    solo_pixels: int = 0
    degenerate: bool = False

    @property
    def fully_occluded(self) -> bool:
        return self.visible_bbox is None

    @property
    def alpha(self) -> float:
        return self.box3d.alpha

    def kitti_bbox(self, width: int, height: int) -> tuple[float, float, float, float]:
        if self.visible_bbox is not None:
            return tuple(float(v) for v in self.visible_bbox)
        return clip_box(self.amodal_bbox, width, height)

    def bbox_height(self, width: int, height: int) -> float:
        _, t, _, b = self.kitti_bbox(width, height)
        return b - t

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id, "class": self.cls, "visible_bbox": self.visible_bbox,
            "amodal_bbox": self.amodal_bbox, "truncation": self.truncation,
            "occlusion_fraction": self.occlusion_fraction, "occlusion_state": self.occlusion_state,
            "visible_pixels": self.visible_pixels, "solo_pixels": self.solo_pixels,
            "fully_occluded": self.fully_occluded, "degenerate": self.degenerate,
        }


def satisfies(height: float, state: int, truncation: float, rule: tuple[float, int, float]) -> bool:
    return height >= rule[0] and state <= rule[1] and truncation <= rule[2]


def difficulty_bucket(height: float, state: int, truncation: float,
                      thresholds: DifficultyThresholds = DifficultyThresholds()) -> str | None:
    """Strictest bucket the label satisfies, or None when excluded from all."""
    for name, rule in thresholds.items():
        if satisfies(height, state, truncation, rule):
            return name
    return None


def bucket_counts(records: Sequence[tuple[float, int, float]],
                  thresholds: DifficultyThresholds = DifficultyThresholds()) -> dict[str, int]:
    """Labels per bucket; a label counts in every bucket whose constraints it meets."""
    out = {name: 0 for name in BUCKETS}
    for h, st, tr in records:
        for name, rule in thresholds.items():
            if satisfies(h, st, tr, rule):
                out[name] += 1
    return out


def compute_labels(objects, mesh: SceneMesh, camera: Camera, instance: np.ndarray,
                   occlusion_cuts: tuple[float, float] = (0.05, 0.50)) -> list[ObjectLabel]:
    """Labels for every object that covers at least one pixel when drawn alone."""
    objects = list(objects)
    if not objects:
        return []
    vis = visible_stats(instance, max(o.instance_id for o in objects))
    solo = solo_pixel_counts(mesh, camera, [o.instance_id for o in objects])
    out = []
    for obj in objects:
        oid = obj.instance_id
        if solo[oid] == 0:
            continue
        amodal = amodal_bbox(camera, mesh.tris[slice(*mesh.object_ranges[oid])])
        n_vis, vbox = vis[oid]
        occ = occlusion_fraction(n_vis, solo[oid])
        out.append(ObjectLabel(
            instance_id=oid, cls=kitti_type(obj.cls), visible_bbox=vbox, amodal_bbox=amodal,
            truncation=truncation_fraction(amodal, camera.width, camera.height),
            occlusion_fraction=occ, occlusion_state=2 if vbox is None else occlusion_state(occ, occlusion_cuts),
            box3d=bbox_3d(obj.asset.nominal_dims, obj.position, obj.yaw, camera),
            visible_pixels=n_vis, solo_pixels=solo[oid], degenerate=box_area(amodal) <= 0.0))
    return out


# -- KITTI text format -------------------------------------------------------------------

@dataclass(frozen=True)
class KittiRecord:
    type: str
    truncated: float
    occluded: int
    alpha: float
    bbox: tuple[float, float, float, float]
    dimensions: tuple[float, float, float]  # height, width, length
    location: tuple[float, float, float]
    rotation_y: float

    @property
    def height(self) -> float:
        return self.bbox[3] - self.bbox[1]


def to_record(label: ObjectLabel, width: int, height: int) -> KittiRecord:
    b = label.box3d
    L, W, H = b.dims
    return KittiRecord(type=label.cls, truncated=label.truncation, occluded=label.occlusion_state, alpha=b.alpha,
                       bbox=label.kitti_bbox(width, height), dimensions=(H, W, L), location=b.location,
                       rotation_y=b.rotation_y)


def format_record(r: KittiRecord) -> str:
    nums = [r.truncated, None, r.alpha, *r.bbox, *r.dimensions, *r.location, r.rotation_y]
    fields = [r.type] + [str(int(r.occluded)) if v is None else f"{v:.2f}" for v in nums]
    # avoid "-0.00"
    return " ".join("0.00" if f == "-0.00" else f for f in fields)


def atomic_write(path: str | os.PathLike, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_kitti_label(records: Sequence[KittiRecord], path: str | os.PathLike) -> None:
    atomic_write(path, "".join(format_record(r) + "\n" for r in records).encode())


def parse_kitti_line(line: str) -> KittiRecord:
    f = line.split()
    if len(f) != 15:
        raise ValueError(f"expected 15 fields, got {len(f)}: {line!r}")
    v = [float(x) for x in f[1:]]
    return KittiRecord(type=f[0], truncated=v[0], occluded=int(f[2]), alpha=v[2], bbox=tuple(v[3:7]),
                       dimensions=tuple(v[7:10]), location=tuple(v[10:13]), rotation_y=v[13])


def parse_kitti_label(path: str | os.PathLike) -> list[KittiRecord]:
    with open(path) as fh:
        return [parse_kitti_line(line) for line in fh if line.strip()]
