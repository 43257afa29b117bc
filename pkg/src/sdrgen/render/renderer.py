"""Scene triangulation, buffer rendering and export encodings.

The scene is flattened into one triangle soup with per-triangle attributes,
in draw order: ground plane, road strips, surface decals, then object meshes.
Rasterization yields a triangle-index buffer and a depth buffer; a deferred
pass reconstructs each pixel's world position from its depth, interpolates
the triangle normal and shades it.  The instance buffer is a lookup of the
winning triangle's instance id, so only object meshes carry nonzero ids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .. import assets as A
from .camera import Camera
from .raster import coverage_counts, new_buffers, rasterize
from .shading import (TEX_GRASS, TEXTURE_IDS, Lighting, PostParams, apply_post, fbm, shade_px, sky_px,
                      texture_px, to_uint8)

STRIP_STEP = 2.0  # meters between road cross-sections
GROUND_HALF = 2000.0
GROUND_Z = -0.05
DECAL_Z = 0.01
DEPTH_EXPORT_MAX = 65535

_DECAL_COLORS = {"pothole": (0.10, 0.10, 0.10), "crack": (0.06, 0.06, 0.06), "oil_spill": (0.04, 0.04, 0.06)}
_DECAL_HALF = {"pothole": (0.6, 0.6), "crack": (0.5, 0.1), "oil_spill": (0.6, 0.6)}
_GRASS_SECONDARY = (0.48, 0.46, 0.22)


@dataclass
class SceneMesh:
    """Flat triangle soup; every array is indexed by triangle."""

    tris: np.ndarray      # (N, 3, 3) world
    normals: np.ndarray   # (N, 3, 3) world, per vertex
    instance: np.ndarray  # (N,) uint16
    albedo: np.ndarray    # (N, 3)
    second: np.ndarray    # (N, 3)
    rough: np.ndarray     # (N,)
    metal: np.ndarray     # (N,)
    tex: np.ndarray       # (N,) int64 texture id
    seed: np.ndarray      # (N,) int64
    origin: np.ndarray    # (N, 3) texture-space origin
    yaw_cs: np.ndarray    # (N, 2) cos/sin of the texture-space yaw
    scale: np.ndarray     # (N,) texture scale (decal size)
    object_ranges: dict = field(default_factory=dict)  # instance id -> (start, stop)

    @property
    def n(self) -> int:
        return self.tris.shape[0]


class _Soup:
    def __init__(self):
        self.parts: list[dict] = []

    def add(self, tris, normals, *, instance=0, albedo, second=None, rough=1.0, metal=0.0, tex=0, seed=0,
            origin=(0.0, 0.0, 0.0), yaw=0.0, scale=1.0):
        n = tris.shape[0]
        if n == 0:
            return
        rep = lambda v, k: np.broadcast_to(np.asarray(v, dtype=np.float64), (n, k)) if k else \
            np.broadcast_to(np.asarray(v, dtype=np.float64), (n,))
        self.parts.append(dict(
            tris=tris, normals=normals, instance=np.full(n, instance, dtype=np.uint16),
            albedo=rep(albedo, 3), second=rep(albedo if second is None else second, 3),
            rough=rep(rough, 0), metal=rep(metal, 0), tex=np.broadcast_to(np.asarray(tex, dtype=np.int64), (n,)),
            seed=np.full(n, seed, dtype=np.int64), origin=rep(origin, 3),
            yaw_cs=rep((math.cos(math.radians(yaw)), math.sin(math.radians(yaw))), 2), scale=rep(scale, 0)))

    def build(self, ranges) -> SceneMesh:
        keys = ("tris", "normals", "instance", "albedo", "second", "rough", "metal", "tex", "seed", "origin",
                "yaw_cs", "scale")
        if not self.parts:
            empty = {"tris": (0, 3, 3), "normals": (0, 3, 3), "albedo": (0, 3), "second": (0, 3),
                     "origin": (0, 3), "yaw_cs": (0, 2)}
            arrays = {k: np.zeros(empty.get(k, (0,)), dtype=np.uint16 if k == "instance" else
                                  np.int64 if k in ("tex", "seed") else np.float64) for k in keys}
            return SceneMesh(**arrays, object_ranges=dict(ranges))
        arrays = {k: np.ascontiguousarray(np.concatenate([p[k] for p in self.parts])) for k in keys}
        return SceneMesh(**arrays, object_ranges=dict(ranges))


def _up_normals(n: int) -> np.ndarray:
    out = np.zeros((n, 3, 3))
    out[..., 2] = 1.0
    return out


def _strip_tris(left: np.ndarray, right: np.ndarray, z: float) -> np.ndarray:
    """Two triangles per quad between consecutive cross-sections of two edge polylines."""
    m = left.shape[0] - 1
    L = np.concatenate([left, np.full((m + 1, 1), z)], axis=1)
    R = np.concatenate([right, np.full((m + 1, 1), z)], axis=1)
    t = np.empty((2 * m, 3, 3))
    t[0::2, 0], t[0::2, 1], t[0::2, 2] = L[:-1], R[:-1], R[1:]
    t[1::2, 0], t[1::2, 1], t[1::2, 2] = L[:-1], R[1:], L[1:]
    return t


def surface_seed(scene, spline_id: int) -> int:
    return (int(scene.globals.cloud_seed) * 31 + 977 * (spline_id + 1)) & 0x7FFFFFFF


def _add_road(soup: _Soup, scene, step: float):
    splines = scene.splines
    center = scene.centerline if scene.centerline is not None else splines[0].centerline
    n = max(2, int(math.ceil(center.length / step)) + 1)
    s = np.linspace(0.0, center.length, n)
    pos, _, nrm = center.sample(s)
    # shared lateral boundaries keep neighbouring strips watertight
    bounds = [sp.left_edge for sp in splines] + [splines[-1].right_edge]
    for k, sp in enumerate(splines):
        left = pos + bounds[k] * nrm
        right = pos + bounds[k + 1] * nrm
        tris = _strip_tris(left, right, 0.0)
        surf = sp.surface
        tex = TEXTURE_IDS[surf.texture_class]
        soup.add(tris, _up_normals(tris.shape[0]), albedo=surf.base_color,
                 second=_GRASS_SECONDARY if tex == TEX_GRASS else surf.base_color, rough=surf.roughness,
                 tex=tex, seed=surface_seed(scene, sp.spline_id))
    for sp in splines:
        for k, imp in enumerate(sp.imperfections):
            _add_decal(soup, scene, sp, imp, center)


def _add_decal(soup: _Soup, scene, sp, imp, center):
    p, tan, nrm = center.sample(np.array([imp.s]))
    c = p[0] + imp.u * nrm[0]
    heading = math.degrees(math.atan2(tan[0, 1], tan[0, 0])) + imp.angle
    hx, hy = _DECAL_HALF[imp.kind]
    a = math.radians(heading)
    ex = np.array([math.cos(a), math.sin(a)]) * hx * imp.extent
    ey = np.array([-math.sin(a), math.cos(a)]) * hy * imp.extent
    corners = [c - ex - ey, c + ex - ey, c + ex + ey, c - ex + ey]
    q = np.array([[x, y, DECAL_Z] for x, y in corners])
    tris = np.stack([q[[0, 1, 2]], q[[0, 2, 3]]])
    base = np.asarray(sp.surface.base_color)
    dark = base + (np.asarray(_DECAL_COLORS[imp.kind]) - base) * imp.intensity
    soup.add(tris, _up_normals(2), albedo=sp.surface.base_color, second=tuple(dark),
             rough=0.25 if imp.kind == "oil_spill" else sp.surface.roughness, tex=TEXTURE_IDS[imp.kind],
             seed=surface_seed(scene, sp.spline_id), origin=(c[0], c[1], DECAL_Z), yaw=heading,
             scale=imp.extent)


def _add_ground(soup: _Soup, scene):
    ex, ey = scene.ego.position[0], scene.ego.position[1]
    h = GROUND_HALF
    q = np.array([[ex - h, ey - h, GROUND_Z], [ex + h, ey - h, GROUND_Z], [ex + h, ey + h, GROUND_Z],
                  [ex - h, ey + h, GROUND_Z]])
    outer = scene.splines[0].surface
    tex = TEXTURE_IDS[outer.texture_class]
    soup.add(np.stack([q[[0, 1, 2]], q[[0, 2, 3]]]), _up_normals(2), albedo=outer.base_color,
             second=_GRASS_SECONDARY if tex == TEX_GRASS else outer.base_color, rough=outer.roughness, tex=tex,
             seed=surface_seed(scene, 10_000))


def object_world_mesh(obj) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """World-space (triangles, vertex normals, part ids) for a placed object."""
    mesh = A.instantiate_asset(obj.asset)
    c, s = math.cos(math.radians(obj.yaw)), math.sin(math.radians(obj.yaw))
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    verts = mesh.vertices @ rot.T + np.asarray(obj.position, dtype=float)
    normals = mesh.normals @ rot.T
    return verts[mesh.faces], normals[mesh.faces], mesh.parts


def _add_object(soup: _Soup, obj) -> int:
    tris, normals, parts = object_world_mesh(obj)
    mat = obj.material
    whole = mat.texture_class == "random"
    tex_id = TEXTURE_IDS[mat.texture_class]
    for part in np.unique(parts):
        sel = parts == part
        albedo, rough, metal = A.part_material(mat, int(part), obj.cls)
        textured = whole or part == A.PART_PRIMARY
        if whole:
            albedo = mat.albedo
        soup.add(tris[sel], normals[sel], instance=obj.instance_id, albedo=albedo,
                 second=mat.secondary_color if mat.secondary_color is not None else albedo, rough=rough,
                 metal=metal, tex=tex_id if textured else 0, seed=mat.texture_seed, origin=obj.position,
                 yaw=obj.yaw)
    return tris.shape[0]


def build_scene_mesh(scene, *, step: float = STRIP_STEP) -> SceneMesh:
    soup = _Soup()
    if scene.splines:
        _add_ground(soup, scene)
        _add_road(soup, scene, step)
    ranges = {}
    start = sum(p["tris"].shape[0] for p in soup.parts)
    for obj in scene.objects:
        n = _add_object(soup, obj)
        ranges[obj.instance_id] = (start, start + n)
        start += n
    return soup.build(ranges)


def mesh_from_triangles(groups, albedo=(0.6, 0.6, 0.6)) -> SceneMesh:
    """Mesh from ``(instance_id, world triangles)`` pairs, drawn in the given order.

    Id 0 marks unlabeled geometry.  Normals are the flat face normals.
    """
    soup = _Soup()
    ranges = {}
    start = 0
    for iid, tris in groups:
        tris = np.asarray(tris, dtype=np.float64).reshape(-1, 3, 3)
        n = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
        n /= np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-300)
        soup.add(tris, np.repeat(n[:, None, :], 3, axis=1), instance=iid, albedo=albedo)
        if iid:
            ranges[iid] = (start, start + tris.shape[0])
        start += tris.shape[0]
    return soup.build(ranges)


# -- rendering ------------------------------------------------------------------------


@dataclass
class RenderBuffers:
    rgb: np.ndarray       # (H, W, 3) uint8
    depth: np.ndarray     # (H, W) float32 meters, +inf where nothing was drawn
    instance: np.ndarray  # (H, W) uint16
    triangle: np.ndarray | None = None  # (H, W) int32 winning triangle, -1 for none


def to_camera(mesh_tris: np.ndarray, camera: Camera) -> np.ndarray:
    return np.ascontiguousarray(camera.world_to_camera(mesh_tris.reshape(-1, 3)).reshape(-1, 3, 3))


def rasterize_mesh(mesh: SceneMesh, camera: Camera) -> tuple[np.ndarray, np.ndarray]:
    """(depth float64, triangle index int32) buffers for a scene mesh."""
    depth, tri_idx = new_buffers(camera.width, camera.height)
    if mesh.n:
        rasterize(to_camera(mesh.tris, camera), camera.fx, camera.fy, camera.cx, camera.cy, camera.near, depth,
                  tri_idx)
    return depth, tri_idx


def solo_pixel_counts(mesh: SceneMesh, camera: Camera, ids) -> dict[int, int]:
    """Pixels each object covers when drawn alone into an empty frame."""
    ids = list(ids)
    if not ids:
        return {}
    chunks = [mesh.tris[slice(*mesh.object_ranges[i])] for i in ids]
    starts = np.zeros(len(ids) + 1, dtype=np.int64)
    starts[1:] = np.cumsum([c.shape[0] for c in chunks])
    tris = to_camera(np.concatenate(chunks), camera) if starts[-1] else np.zeros((0, 3, 3))
    counts = coverage_counts(tris, starts, camera.fx, camera.fy, camera.cx, camera.cy, camera.near,
                             camera.width, camera.height)
    return {i: int(c) for i, c in zip(ids, counts)}


@nb.njit(cache=True)
def _shade_frame(tri_idx, depth, rays, R, cam_pos, tris, normals, albedo, second, rough, metal, tex, seed,
                 origin, yaw_cs, scale, sun_dir, sun_rgb, ambient, sky, cloud_density, cloud_seed, draw_sky,
                 out):
    height, width = tri_idx.shape
    n = np.empty(3)
    view = np.empty(3)
    alb = np.empty(3)
    col = np.empty(3)
    p = np.empty(3)
    for j in range(height):
        for i in range(width):
            t = tri_idx[j, i]
            if t < 0:
                if draw_sky:
                    # world direction of the pixel ray
                    dx = rays[j, i, 0] * R[0, 0] + rays[j, i, 1] * R[1, 0] + rays[j, i, 2] * R[2, 0]
                    dy = rays[j, i, 0] * R[0, 1] + rays[j, i, 1] * R[1, 1] + rays[j, i, 2] * R[2, 1]
                    dz = rays[j, i, 0] * R[0, 2] + rays[j, i, 1] * R[1, 2] + rays[j, i, 2] * R[2, 2]
                    norm = math.sqrt(dx * dx + dy * dy + dz * dz)
                    sky_px(dx / norm, dy / norm, dz / norm, sky, cloud_density, cloud_seed, col)
                    for k in range(3):
                        out[j, i, k] = col[k]
                continue
            z = depth[j, i]
            for k in range(3):
                p[k] = cam_pos[k] + z * (rays[j, i, 0] * R[0, k] + rays[j, i, 1] * R[1, k] + rays[j, i, 2] * R[2, k])
            # barycentrics of p in the unclipped world triangle
            ax, ay, az = tris[t, 0, 0], tris[t, 0, 1], tris[t, 0, 2]
            e1x, e1y, e1z = tris[t, 1, 0] - ax, tris[t, 1, 1] - ay, tris[t, 1, 2] - az
            e2x, e2y, e2z = tris[t, 2, 0] - ax, tris[t, 2, 1] - ay, tris[t, 2, 2] - az
            epx, epy, epz = p[0] - ax, p[1] - ay, p[2] - az
            d11 = e1x * e1x + e1y * e1y + e1z * e1z
            d12 = e1x * e2x + e1y * e2y + e1z * e2z
            d22 = e2x * e2x + e2y * e2y + e2z * e2z
            dp1 = epx * e1x + epy * e1y + epz * e1z
            dp2 = epx * e2x + epy * e2y + epz * e2z
            den = d11 * d22 - d12 * d12
            if den > 0.0:
                b1 = (d22 * dp1 - d12 * dp2) / den
                b2 = (d11 * dp2 - d12 * dp1) / den
            else:
                b1 = 0.0
                b2 = 0.0
            b0 = 1.0 - b1 - b2
            for k in range(3):
                n[k] = b0 * normals[t, 0, k] + b1 * normals[t, 1, k] + b2 * normals[t, 2, k]
                view[k] = cam_pos[k] - p[k]
            nn = math.sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2])
            vn = math.sqrt(view[0] * view[0] + view[1] * view[1] + view[2] * view[2])
            if nn == 0.0:
                n[0], n[1], n[2], nn = 0.0, 0.0, 1.0, 1.0
            for k in range(3):
                n[k] /= nn
                view[k] /= vn
            if n[0] * view[0] + n[1] * view[1] + n[2] * view[2] < 0.0:
                for k in range(3):
                    n[k] = -n[k]
            # texture space: object or decal frame
            c, s = yaw_cs[t, 0], yaw_cs[t, 1]
            qx, qy, qz = p[0] - origin[t, 0], p[1] - origin[t, 1], p[2] - origin[t, 2]
            lx, ly = c * qx + s * qy, -s * qx + c * qy
            nlx, nly = c * n[0] + s * n[1], -s * n[0] + c * n[1]
            texture_px(tex[t], seed[t], p[0], p[1], p[2], lx, ly, qz, nlx, nly, n[2], scale[t], albedo[t],
                       second[t], alb)
            shade_px(n, alb, rough[t], metal[t], sun_dir, sun_rgb, ambient, view, True, col)
            for k in range(3):
                out[j, i, k] = col[k]


@nb.njit(cache=True)
def _noise_backdrop(height, width, seed, colors, scale, out):
    for j in range(height):
        for i in range(width):
            u = i / width * 8.0 * scale
            v = j / width * 8.0 * scale
            m1 = fbm(u, v, seed, 4)
            m2 = fbm(u * 2.3 + 5.0, v * 2.3, seed + 101, 3)
            for k in range(3):
                a = colors[0, k] + (colors[1, k] - colors[0, k]) * m1
                out[j, i, k] = a + (colors[2, k] - a) * max(0.0, m2 * 2.0 - 1.0)


def backdrop(background, width: int, height: int) -> np.ndarray:
    """(H, W, 3) float image for a context-free scene backdrop."""
    out = np.zeros((height, width, 3))
    if background.kind == "image":
        from PIL import Image

        with Image.open(background.path) as im:
            im = im.convert("RGB").resize((width, height), Image.BILINEAR)
            return np.asarray(im, dtype=np.float64) / 255.0
    _noise_backdrop(height, width, int(background.seed), np.asarray(background.colors, dtype=np.float64),
                    float(background.scale), out)
    return out


def render_mesh(mesh: SceneMesh, camera: Camera, lighting: Lighting, post: PostParams,
                background=None) -> RenderBuffers:
    depth, tri_idx = rasterize_mesh(mesh, camera)
    lin = np.zeros((camera.height, camera.width, 3))
    sd, sr, amb = lighting.arrays()
    _shade_frame(tri_idx, depth, camera.pixel_rays(), camera.R, camera.position, mesh.tris, mesh.normals,
                 mesh.albedo, mesh.second, mesh.rough, mesh.metal, mesh.tex, mesh.seed, mesh.origin, mesh.yaw_cs,
                 mesh.scale, sd, sr, amb, np.asarray(lighting.sky_color, dtype=np.float64),
                 float(lighting.cloud_density), int(lighting.cloud_seed), background is None, lin)
    if background is not None:
        empty = tri_idx < 0
        lin[empty] = backdrop(background, camera.width, camera.height)[empty]
    instance = np.zeros(tri_idx.shape, dtype=np.uint16)
    if mesh.n:
        instance = np.where(tri_idx >= 0, mesh.instance[np.maximum(tri_idx, 0)], 0).astype(np.uint16)
    return RenderBuffers(rgb=to_uint8(apply_post(lin, post)), depth=depth.astype(np.float32), instance=instance,
                         triangle=tri_idx)


def render(scene, camera: Camera, lighting: Lighting, post: PostParams) -> RenderBuffers:
    return render_mesh(build_scene_mesh(scene), camera, lighting, post, scene.background)


def encode_depth(depth: np.ndarray) -> np.ndarray:
    """Meters to 16-bit centimeters; +inf and anything past 655.35 m clamp to 65535."""
    cm = np.where(np.isfinite(depth), np.round(depth.astype(np.float64) * 100.0), DEPTH_EXPORT_MAX)
    return np.clip(cm, 0, DEPTH_EXPORT_MAX).astype(np.uint16)
