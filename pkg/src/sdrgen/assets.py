"""Procedural low-poly assets and randomized materials.

Meshes are local to the object: x forward (length), y left (width), z up,
with the footprint centered on the origin and the base on z = 0, so the mesh
bounds are exactly ``[-L/2, L/2] x [-W/2, W/2] x [0, H]``.
"""

from __future__ import annotations

import colorsys
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np

from .errors import ConfigError
from .rng import RngStream

VEHICLE_CLASSES = ("car", "truck")
VARIANT_COUNTS: dict[str, int] = {
    "car": 74, "truck": 13, "bicycle": 5, "cyclist": 5, "pedestrian": 20, "building": 41, "house": 87,
    "tree": 24, "road_sign": 100, "street_light": 3, "wall": 2, "fence": 3, "fire_hydrant": 2,
    "recycling_bin": 3, "telephone_pole": 2, "traffic_light": 2, "utility_box": 2,
}
ASSET_CLASSES = tuple(VARIANT_COUNTS)
FURNITURE_CLASSES = ("street_light", "wall", "fence", "fire_hydrant", "recycling_bin", "telephone_pole",
                     "traffic_light", "utility_box", "bicycle")

# mesh part ids
PART_PRIMARY, PART_GLASS, PART_DARK, PART_SECONDARY = 0, 1, 2, 3

PAINT_PALETTE: dict[str, tuple[float, float, float]] = {
    "white": (0.90, 0.90, 0.89),
    "black": (0.04, 0.04, 0.05),
    "silver": (0.72, 0.73, 0.75),
    "gray": (0.40, 0.41, 0.43),
    "red": (0.65, 0.06, 0.06),
    "blue": (0.08, 0.18, 0.55),
    "green": (0.10, 0.36, 0.16),
    "brown": (0.42, 0.28, 0.16),
    "yellow": (0.88, 0.72, 0.08),
}


@dataclass(frozen=True)
class AssetDescriptor:
    cls: str
    variant_id: int
    nominal_dims: tuple[float, float, float]  # length, width, height
    mesh_params: tuple[tuple[str, float], ...] = ()

    @property
    def params(self) -> dict[str, float]:
        return dict(self.mesh_params)


@dataclass(frozen=True)
class Material:
    base_color: tuple[float, float, float]
    lightness_delta: float = 0.0
    roughness: float = 0.5
    metallic: float = 0.0
    texture_class: str = "none"
    texture_seed: int = 0
    secondary_color: tuple[float, float, float] | None = None  # used by the random texture
    palette_name: str | None = None

    @property
    def albedo(self) -> tuple[float, float, float]:
        return apply_lightness(self.base_color, self.lightness_delta)


def apply_lightness(color, delta: float) -> tuple[float, float, float]:
    c = np.asarray(color, dtype=float)
    out = c + delta * (1.0 - c) if delta >= 0 else c * (1.0 + delta)
    return tuple(float(x) for x in out)


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (V, 3)
    faces: np.ndarray     # (F, 3) int
    normals: np.ndarray   # (V, 3) per-vertex
    parts: np.ndarray     # (F,) part id per face

    @property
    def triangles(self) -> np.ndarray:
        return self.vertices[self.faces]

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


# -- primitive builders --------------------------------------------------------


class _Builder:
    def __init__(self):
        self.tris: list[np.ndarray] = []
        self.parts: list[int] = []

    def tri(self, a, b, c, part):
        self.tris.append(np.array([a, b, c], dtype=float))
        self.parts.append(part)

    def quad(self, a, b, c, d, part):
        self.tri(a, b, c, part)
        self.tri(a, c, d, part)

    def poly(self, pts, part):
        for i in range(1, len(pts) - 1):
            self.tri(pts[0], pts[i], pts[i + 1], part)

    def box(self, x0, x1, y0, y1, z0, z1, part, top_part=None):
        self.prism_z([(x0, y0), (x1, y0), (x1, y1), (x0, y1)], z0, z1, part, top_part)

    def prism_z(self, profile, z0, z1, part, top_part=None):
        """Vertical prism over a convex xy polygon."""
        pts = list(profile)
        n = len(pts)
        for i in range(n):
            (ax, ay), (bx, by) = pts[i], pts[(i + 1) % n]
            self.quad((ax, ay, z0), (bx, by, z0), (bx, by, z1), (ax, ay, z1), part)
        self.poly([(x, y, z0) for x, y in reversed(pts)], part)
        self.poly([(x, y, z1) for x, y in pts], part if top_part is None else top_part)

    def prism_y(self, profile_xz, y0, y1, side_part, cap_part=None, face_parts=None):
        """Prism over a convex xz polygon extruded across y."""
        pts = list(profile_xz)
        n = len(pts)
        for i in range(n):
            (ax, az), (bx, bz) = pts[i], pts[(i + 1) % n]
            part = side_part if face_parts is None else face_parts[i]
            self.quad((ax, y0, az), (bx, y0, bz), (bx, y1, bz), (ax, y1, az), part)
        cap = side_part if cap_part is None else cap_part
        self.poly([(x, y0, z) for x, z in pts], cap)
        self.poly([(x, y1, z) for x, z in reversed(pts)], cap)

    def wheel(self, cx, cz, r, y0, y1, n=10, part=PART_DARK):
        # first vertex at the bottom so the wheel touches z = cz - r exactly
        prof = [(cx + r * math.cos(-math.pi / 2 + 2 * math.pi * k / n),
                 cz + r * math.sin(-math.pi / 2 + 2 * math.pi * k / n)) for k in range(n)]
        self.prism_y(prof, y0, y1, part)

    def frustum_z(self, cx, cy, r0, r1, z0, z1, n, part):
        ang = [2 * math.pi * k / n for k in range(n)]
        lo = [(cx + r0 * math.cos(a), cy + r0 * math.sin(a), z0) for a in ang]
        hi = [(cx + r1 * math.cos(a), cy + r1 * math.sin(a), z1) for a in ang]
        for i in range(n):
            j = (i + 1) % n
            if r1 > 0:
                self.quad(lo[i], lo[j], hi[j], hi[i], part)
            else:
                self.tri(lo[i], lo[j], (cx, cy, z1), part)
        self.poly(list(reversed(lo)), part)
        if r1 > 0:
            self.poly(hi, part)

    def build(self) -> TriangleMesh:
        tris = np.stack(self.tris)
        verts = tris.reshape(-1, 3)
        faces = np.arange(len(verts), dtype=np.int32).reshape(-1, 3)
        n = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        n = np.where(norm > 0, n / np.where(norm > 0, norm, 1.0), np.array([0.0, 0.0, 1.0]))
        normals = np.repeat(n, 3, axis=0)
        return TriangleMesh(verts, faces, normals, np.asarray(self.parts, dtype=np.int8))


# -- per-class shapes ---------------------------------------------------------

def _u(rng, lo, hi):
    return rng.uniform(lo, hi)


def _car_params(rng):
    L, W, H = _u(rng, 3.6, 5.2), _u(rng, 1.6, 2.0), _u(rng, 1.3, 1.8)
    return (L, W, H), {
        "wheel_radius": _u(rng, 0.28, 0.38),
        "shoulder": _u(rng, 0.45, 0.62),
        "cabin_front": _u(rng, 0.02, 0.12),
        "cabin_back": _u(rng, -0.32, -0.22),
        "windshield": _u(rng, 0.12, 0.22),
        "rear_slope": _u(rng, 0.04, 0.15),
        "cabin_inset": _u(rng, 0.06, 0.12),
    }


def _car_mesh(L, W, H, p, b: _Builder):
    r = p["wheel_radius"]
    clearance = 0.55 * r
    zs = H * p["shoulder"]
    # lower body: side profile with sloped nose, full length and width
    nose = min(0.15 * L, 0.6)
    body = [(-L / 2, clearance), (L / 2 - nose * 0.3, clearance), (L / 2, clearance + 0.35 * (zs - clearance)),
            (L / 2, zs - 0.1 * (zs - clearance)), (L / 2 - nose, zs), (-L / 2, zs)]
    b.prism_y(body, -W / 2, W / 2, PART_PRIMARY)
    # cabin wedge
    inset = p["cabin_inset"] * W
    xf, xb = p["cabin_front"] * L, p["cabin_back"] * L
    ws, rs = p["windshield"] * L, p["rear_slope"] * L
    cabin = [(xb - rs, zs), (xf + ws, zs), (xf, H), (xb, H)]
    b.prism_y(cabin, -W / 2 + inset, W / 2 - inset, PART_GLASS, cap_part=PART_GLASS,
              face_parts=[PART_PRIMARY, PART_GLASS, PART_PRIMARY, PART_GLASS])
    tw = min(0.22, 0.12 * W)
    for x in (L / 2 - 0.2 * L, -L / 2 + 0.18 * L):
        b.wheel(x, r, r, W / 2 - tw, W / 2)
        b.wheel(x, r, r, -W / 2, -W / 2 + tw)


def _truck_params(rng):
    L, W, H = _u(rng, 6.0, 10.0), _u(rng, 2.2, 2.6), _u(rng, 2.8, 3.8)
    return (L, W, H), {"wheel_radius": _u(rng, 0.45, 0.55), "cab_length": _u(rng, 1.8, 2.4),
                       "cab_height": _u(rng, 0.7, 0.85), "axles": float(rng.integers(2, 3))}


def _truck_mesh(L, W, H, p, b: _Builder):
    r = p["wheel_radius"]
    floor = 0.9 * r
    cab = p["cab_length"]
    b.box(-L / 2, L / 2 - cab - 0.1, -W / 2, W / 2, floor, H, PART_PRIMARY)
    ch = floor + (H - floor) * p["cab_height"]
    b.box(L / 2 - cab, L / 2, -W / 2 + 0.05, W / 2 - 0.05, floor, ch * 0.7, PART_SECONDARY)
    b.prism_y([(L / 2 - cab, ch * 0.7), (L / 2, ch * 0.7), (L / 2 - 0.25, ch), (L / 2 - cab, ch)],
              -W / 2 + 0.05, W / 2 - 0.05, PART_GLASS, face_parts=[PART_SECONDARY, PART_GLASS, PART_SECONDARY,
                                                                   PART_GLASS])
    tw = 0.3
    xs = [L / 2 - cab * 0.6, -L / 2 + 1.2]
    if p["axles"] > 2:
        xs.append(-L / 2 + 1.2 + 2.3 * r)
    for x in xs:
        b.wheel(x, r, r, W / 2 - tw, W / 2)
        b.wheel(x, r, r, -W / 2, -W / 2 + tw)


def _bicycle_params(rng):
    return (_u(rng, 1.6, 1.85), _u(rng, 0.45, 0.6), _u(rng, 0.95, 1.1)), {"wheel_radius": _u(rng, 0.3, 0.36)}


def _bicycle_mesh(L, W, H, p, b: _Builder):
    r = min(p["wheel_radius"], L / 4)
    t = 0.03
    for x in (L / 2 - r, -L / 2 + r):
        b.wheel(x, r, r, -t, t, n=12)
    b.box(-L / 2 + r, L / 2 - r, -t, t, 1.6 * r - 0.03, 1.6 * r + 0.03, PART_SECONDARY)
    b.box(-0.05, 0.05, -t, t, r, H - 0.05, PART_SECONDARY)
    b.box(L / 2 - r - 0.05, L / 2 - r + 0.02, -t, t, r, H, PART_SECONDARY)
    b.box(L / 2 - r - 0.08, L / 2 - r + 0.02, -W / 2, W / 2, H - 0.04, H, PART_DARK)  # handlebar


def _cyclist_params(rng):
    return (_u(rng, 1.65, 1.85), _u(rng, 0.5, 0.65), _u(rng, 1.6, 1.85)), {"wheel_radius": _u(rng, 0.3, 0.35)}


def _cyclist_mesh(L, W, H, p, b: _Builder):
    r = min(p["wheel_radius"], L / 4)
    t = 0.03
    for x in (L / 2 - r, -L / 2 + r):
        b.wheel(x, r, r, -t, t, n=12, part=PART_DARK)
    b.box(-L / 2 + r, L / 2 - r, -t, t, 1.5 * r, 1.5 * r + 0.05, PART_DARK)
    seat = 2.7 * r
    b.box(-0.12, 0.12, -W / 2 + 0.05, W / 2 - 0.05, seat, seat + 0.1, PART_PRIMARY)  # hips
    torso_top = H - 0.28
    b.prism_y([(-0.15, seat + 0.1), (0.05, seat + 0.1), (0.3, torso_top), (0.08, torso_top)],
              -W / 2 + 0.08, W / 2 - 0.08, PART_PRIMARY)
    b.box(0.3, L / 2 - r, -W / 2, W / 2, torso_top - 0.35, torso_top - 0.25, PART_PRIMARY)  # arms
    b.frustum_z(0.17, 0.0, 0.12, 0.1, torso_top, H, 8, PART_SECONDARY)  # head
    b.box(-0.05, 0.08, -0.08, 0.08, r, seat, PART_PRIMARY)  # legs


def _pedestrian_params(rng):
    return (_u(rng, 0.3, 0.45), _u(rng, 0.45, 0.6), _u(rng, 1.5, 1.95)), {
        "leg_frac": _u(rng, 0.44, 0.5), "head_frac": _u(rng, 0.12, 0.14)}


def _pedestrian_mesh(L, W, H, p, b: _Builder):
    leg = H * p["leg_frac"]
    head = H * p["head_frac"]
    torso_top = H - head
    gap = 0.04
    lw = W * 0.22
    b.box(-L / 3, L / 3, gap / 2, gap / 2 + lw, 0.0, leg, PART_DARK)
    b.box(-L / 3, L / 3, -gap / 2 - lw, -gap / 2, 0.0, leg, PART_DARK)
    # torso as an octagonal prism spanning the full depth and width
    hx, hy = L / 2, W / 2
    c = 0.35
    octa = [(hx, -hy * (1 - c)), (hx, hy * (1 - c)), (hx * (1 - c), hy), (-hx * (1 - c), hy),
            (-hx, hy * (1 - c)), (-hx, -hy * (1 - c)), (-hx * (1 - c), -hy), (hx * (1 - c), -hy)]
    b.prism_z(octa, leg, torso_top - 0.03, PART_PRIMARY)
    b.frustum_z(0.0, 0.0, head * 0.42, head * 0.38, torso_top, H, 8, PART_SECONDARY)


def _building_params(rng):
    return (_u(rng, 10.0, 30.0), _u(rng, 10.0, 20.0), _u(rng, 8.0, 45.0)), {
        "roof": _u(rng, 0.0, 1.0), "plinth": _u(rng, 0.0, 1.0)}


def _building_mesh(L, W, H, p, b: _Builder):
    if p["roof"] > 0.5:
        b.box(-L / 2, L / 2, -W / 2, W / 2, 0.0, H - 1.2, PART_PRIMARY)
        b.box(-L / 4, L / 4, -W / 4, W / 4, H - 1.2, H, PART_SECONDARY)
    else:
        b.box(-L / 2, L / 2, -W / 2, W / 2, 0.0, H, PART_PRIMARY, top_part=PART_SECONDARY)


def _house_params(rng):
    return (_u(rng, 8.0, 16.0), _u(rng, 7.0, 12.0), _u(rng, 5.0, 9.0)), {"wall_frac": _u(rng, 0.5, 0.7)}


def _house_mesh(L, W, H, p, b: _Builder):
    wall = H * p["wall_frac"]
    b.box(-L / 2, L / 2, -W / 2 + 0.3, W / 2 - 0.3, 0.0, wall, PART_PRIMARY)
    # gable roof spans the full width (eaves) and length, ridge along x
    # extrude the gable profile (in yz) along x by building it across y and swapping axes
    tmp = _Builder()
    tmp.prism_y([(-W / 2, wall), (W / 2, wall), (0.0, H)], -L / 2, L / 2, PART_SECONDARY)
    for tri, part in zip(tmp.tris, tmp.parts):
        b.tri(*[(v[1], v[0], v[2]) for v in tri], part)


def _tree_params(rng):
    d = _u(rng, 2.0, 7.0)
    return (d, d, _u(rng, 4.0, 14.0)), {"conifer": float(rng.random() < 0.45), "trunk": _u(rng, 0.2, 0.35)}


def _tree_mesh(L, W, H, p, b: _Builder):
    r = L / 2
    trunk_r = min(0.1 + 0.04 * H, 0.35)
    crown0 = H * p["trunk"]
    b.frustum_z(0, 0, trunk_r, trunk_r * 0.8, 0.0, crown0 + 0.5, 6, PART_SECONDARY)
    if p["conifer"] > 0.5:
        mid = crown0 + 0.45 * (H - crown0)
        b.frustum_z(0, 0, r, 0.0, crown0, mid + 0.4 * (H - crown0), 8, PART_PRIMARY)
        b.frustum_z(0, 0, 0.7 * r, 0.0, mid, H, 8, PART_PRIMARY)
    else:
        # crossed billboards plus a coarse crown volume
        for pts in ([(-r, 0, crown0), (r, 0, crown0), (r, 0, H), (-r, 0, H)],
                    [(0, -r, crown0), (0, r, crown0), (0, r, H), (0, -r, H)]):
            b.poly(pts, PART_PRIMARY)
        b.frustum_z(0, 0, 0.8 * r, 0.5 * r, crown0 + 0.15 * (H - crown0), H - 0.1 * (H - crown0), 8,
                    PART_PRIMARY)


def _sign_params(rng):
    return (_u(rng, 0.06, 0.1), _u(rng, 0.6, 1.2), _u(rng, 2.0, 3.0)), {"shape": float(rng.integers(0, 3))}


def _sign_mesh(L, W, H, p, b: _Builder):
    pole = min(0.035, L / 2)
    b.box(-pole, pole, -pole, pole, 0.0, H - W * 0.5, PART_SECONDARY)
    shape = int(p["shape"])
    z0 = H - W
    cz = z0 + W / 2
    if shape == 0:
        prof = [(-W / 2, z0), (W / 2, z0), (W / 2, H), (-W / 2, H)]
    elif shape == 1:
        prof = [(0.0, z0), (W / 2, cz), (0.0, H), (-W / 2, cz)]
    else:
        prof = [(W / 2 * math.cos(a), cz + W / 2 * math.sin(a))
                for a in (math.pi / 8 + k * math.pi / 4 for k in range(8))]
        # stretch to touch the nominal extents
        ys = [q[0] for q in prof]
        zs = [q[1] for q in prof]
        sy, sz = W / (max(ys) - min(ys)), W / (max(zs) - min(zs))
        prof = [(y * sy, cz + (z - cz) * sz) for y, z in prof]
    # panel in the yz plane, thickness along x
    tmp = _Builder()
    tmp.prism_y([(y, z) for y, z in prof], -L / 2, L / 2, PART_PRIMARY)
    for tri, part in zip(tmp.tris, tmp.parts):
        b.tri(*[(v[1], v[0], v[2]) for v in tri], part)


def _misc_params(cls):
    dims = {
        "street_light": ((1.5, 2.0), (0.25, 0.3), (6.0, 9.0)),
        "wall": ((4.0, 10.0), (0.25, 0.35), (1.0, 2.5)),
        "fence": ((3.0, 8.0), (0.08, 0.12), (1.0, 1.5)),
        "fire_hydrant": ((0.35, 0.45), (0.35, 0.45), (0.7, 0.85)),
        "recycling_bin": ((0.55, 0.7), (0.55, 0.7), (0.95, 1.1)),
        "telephone_pole": ((0.3, 0.35), (1.6, 2.0), (8.0, 11.0)),
        "traffic_light": ((0.35, 0.45), (0.35, 0.45), (3.5, 4.5)),
        "utility_box": ((0.6, 1.0), (0.4, 0.6), (1.0, 1.5)),
    }[cls]

    def sample(rng):
        return tuple(_u(rng, lo, hi) for lo, hi in dims), {}
    return sample


def _misc_mesh(cls):
    def build(L, W, H, p, b: _Builder):
        if cls == "street_light":
            b.box(-L / 2, -L / 2 + 0.2, -W / 2, W / 2, 0.0, H - 0.25, PART_SECONDARY)
            b.box(-L / 2, L / 2, -W / 2, W / 2, H - 0.25, H, PART_PRIMARY)
        elif cls == "fence":
            n_posts = max(2, int(L / 1.5) + 1)
            for k in range(n_posts):
                x = -L / 2 + (L - 0.1) * k / (n_posts - 1)
                b.box(x, x + 0.1, -W / 2, W / 2, 0.0, H, PART_PRIMARY)
            for z in (0.35 * H, 0.8 * H):
                b.box(-L / 2, L / 2, -W / 4, W / 4, z, z + 0.08, PART_PRIMARY)
        elif cls == "fire_hydrant":
            b.frustum_z(0, 0, L / 2 * 0.7, L / 2 * 0.7, 0.0, H * 0.85, 8, PART_PRIMARY)
            b.frustum_z(0, 0, L / 2 * 0.6, 0.05, H * 0.85, H, 8, PART_PRIMARY)
            b.box(-L / 2, L / 2, -0.05, 0.05, H * 0.5, H * 0.62, PART_PRIMARY)
            b.box(-0.05, 0.05, -W / 2, W / 2, H * 0.5, H * 0.62, PART_PRIMARY)
        elif cls == "telephone_pole":
            b.frustum_z(0, 0, L / 2, L / 2 * 0.8, 0.0, H, 8, PART_SECONDARY)
            b.box(-0.06, 0.06, -W / 2, W / 2, H - 1.0, H - 0.85, PART_SECONDARY)
        elif cls == "traffic_light":
            b.box(-0.06, 0.06, -0.06, 0.06, 0.0, H - 1.0, PART_SECONDARY)
            b.box(-L / 2, L / 2, -W / 2, W / 2, H - 1.0, H, PART_DARK)
        else:  # wall, recycling_bin, utility_box
            b.box(-L / 2, L / 2, -W / 2, W / 2, 0.0, H, PART_PRIMARY)
    return build


_SHAPES = {
    "car": (_car_params, _car_mesh),
    "truck": (_truck_params, _truck_mesh),
    "bicycle": (_bicycle_params, _bicycle_mesh),
    "cyclist": (_cyclist_params, _cyclist_mesh),
    "pedestrian": (_pedestrian_params, _pedestrian_mesh),
    "building": (_building_params, _building_mesh),
    "house": (_house_params, _house_mesh),
    "tree": (_tree_params, _tree_mesh),
    "road_sign": (_sign_params, _sign_mesh),
}
for _c in ("street_light", "wall", "fence", "fire_hydrant", "recycling_bin", "telephone_pole", "traffic_light",
           "utility_box"):
    _SHAPES[_c] = (_misc_params(_c), _misc_mesh(_c))


@lru_cache(maxsize=None)
def asset_descriptor(cls: str, variant_id: int) -> AssetDescriptor:
    """Dimensions and shape parameters of one variant; a pure function of (cls, variant_id)."""
    if cls not in _SHAPES:
        raise ConfigError(f"unknown asset class {cls!r}")
    if not 0 <= variant_id < VARIANT_COUNTS[cls]:
        raise ConfigError(f"{cls} variant {variant_id} out of range [0, {VARIANT_COUNTS[cls]})")
    rng = RngStream(0, variant_id, f"asset/{cls}")
    dims, params = _SHAPES[cls][0](rng)
    return AssetDescriptor(cls, variant_id, tuple(float(d) for d in dims), tuple(sorted(params.items())))


@lru_cache(maxsize=None)
def _mesh_cached(desc: AssetDescriptor) -> TriangleMesh:
    L, W, H = desc.nominal_dims
    b = _Builder()
    _SHAPES[desc.cls][1](L, W, H, desc.params, b)
    mesh = b.build()
    for arr in (mesh.vertices, mesh.faces, mesh.normals, mesh.parts):
        arr.setflags(write=False)
    return mesh


def instantiate_asset(descriptor: AssetDescriptor) -> TriangleMesh:
    if descriptor.cls not in _SHAPES:
        raise ConfigError(f"unknown asset class {descriptor.cls!r}")
    return _mesh_cached(descriptor)


def sample_variant(rng: RngStream, cls: str, counts: Mapping[str, int] | None = None) -> AssetDescriptor:
    n = (counts or VARIANT_COUNTS)[cls]
    return asset_descriptor(cls, rng.integers(0, min(n, VARIANT_COUNTS[cls]) - 1))


# -- materials ------------------------------------------------------------------

SECONDARY_COLORS = {
    "tree": (0.30, 0.20, 0.12),
    "pedestrian": (0.62, 0.46, 0.36),
    "cyclist": (0.62, 0.46, 0.36),
    "truck": (0.75, 0.75, 0.76),
    "building": (0.35, 0.35, 0.36),
    "house": (0.38, 0.20, 0.15),
}
PART_COLORS = {PART_GLASS: (0.07, 0.09, 0.12), PART_DARK: (0.05, 0.05, 0.05)}
DEFAULT_SECONDARY = (0.45, 0.45, 0.46)


def _hsv(rng, h, s, v):
    return tuple(float(c) for c in colorsys.hsv_to_rgb(rng.uniform(*h) % 1.0, rng.uniform(*s), rng.uniform(*v)))


def sample_material(rng: RngStream, cls: str, *, palette: Mapping[str, tuple] | None = None,
                    lightness_range: tuple[float, float] = (-0.2, 0.2), randomized: bool = False) -> Material:
    """Material for one object; vehicles use the paint palette, other classes class-specific colors.

    ``randomized`` gives the texture-randomized look used for context-free scenes.
    """
    palette = PAINT_PALETTE if palette is None else palette
    seed = rng.integers(0, 2**31 - 1)
    if randomized:
        return Material(base_color=_hsv(rng, (0, 1), (0.2, 1.0), (0.1, 1.0)), roughness=rng.uniform(0.2, 1.0),
                        metallic=rng.uniform(0.0, 1.0), texture_class="random", texture_seed=seed,
                        secondary_color=_hsv(rng, (0, 1), (0.2, 1.0), (0.1, 1.0)))
    if cls in VEHICLE_CLASSES:
        names = list(palette)
        name = names[rng.integers(0, len(names) - 1)]
        return Material(base_color=tuple(float(c) for c in palette[name]),
                        lightness_delta=rng.uniform(*lightness_range), roughness=rng.uniform(0.1, 0.6),
                        metallic=rng.uniform(0.0, 1.0), texture_class="none", texture_seed=seed,
                        palette_name=name)
    if cls in ("pedestrian", "cyclist"):
        return Material(_hsv(rng, (0, 1), (0.2, 0.8), (0.12, 0.85)), rng.uniform(-0.1, 0.1),
                        rng.uniform(0.6, 1.0), 0.0, "none", seed)
    if cls == "building":
        facades = [(0.75, 0.68, 0.55), (0.55, 0.55, 0.56), (0.55, 0.25, 0.18), (0.85, 0.84, 0.80),
                   (0.30, 0.32, 0.35)]
        base = facades[rng.integers(0, len(facades) - 1)]
        return Material(base, rng.uniform(-0.15, 0.15), rng.uniform(0.5, 0.95), rng.uniform(0.0, 0.3),
                        "windows", seed)
    if cls == "house":
        return Material(_hsv(rng, (0.0, 1.0), (0.1, 0.45), (0.55, 0.95)), rng.uniform(-0.1, 0.1),
                        rng.uniform(0.6, 1.0), 0.0, "windows", seed)
    if cls == "tree":
        return Material(_hsv(rng, (0.17, 0.38), (0.4, 0.85), (0.18, 0.5)), 0.0, rng.uniform(0.7, 1.0), 0.0,
                        "foliage", seed)
    if cls == "road_sign":
        colors = [(0.75, 0.08, 0.08), (0.08, 0.22, 0.65), (0.05, 0.45, 0.2), (0.9, 0.78, 0.1), (0.9, 0.9, 0.9)]
        return Material(colors[rng.integers(0, len(colors) - 1)], 0.0, rng.uniform(0.3, 0.7),
                        rng.uniform(0.0, 0.5), "none", seed)
    return Material(_hsv(rng, (0, 1), (0.0, 0.35), (0.2, 0.7)), 0.0, rng.uniform(0.4, 0.9),
                    rng.uniform(0.0, 0.6), "none", seed)


def part_material(material: Material, part: int, cls: str) -> tuple[tuple[float, float, float], float, float]:
    """(albedo, roughness, metallic) for one mesh part."""
    if part == PART_PRIMARY:
        return material.albedo, material.roughness, material.metallic
    if part == PART_GLASS:
        return PART_COLORS[PART_GLASS], 0.08, 0.0
    if part == PART_DARK:
        return PART_COLORS[PART_DARK], 0.9, 0.0
    return SECONDARY_COLORS.get(cls, DEFAULT_SECONDARY), 0.85, 0.0


@dataclass(frozen=True)
class MaterialSettings:
    palette: dict = field(default_factory=lambda: dict(PAINT_PALETTE))
    lightness_range: tuple[float, float] = (-0.2, 0.2)
