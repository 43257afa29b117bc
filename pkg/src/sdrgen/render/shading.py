"""Lighting, procedural textures and post-processing.

Shading is Lambertian diffuse plus one Blinn-Phong lobe:

    color = albedo * (ambient + sun * max(0, n . -d)) + spec

where ``d`` is the direction the sunlight travels.  The lobe exponent grows as
roughness falls and its tint moves from 4% gray to the albedo as metallic
rises.  All per-pixel kernels are numba functions; the Python helpers call the
same kernels so tests exercise the code the renderer runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

AMBIENT_SCALE = 0.65
SUN_SCALE = 0.7
SPEC_F0 = 0.04

# texture ids
TEX_NONE, TEX_ASPHALT, TEX_GRASS, TEX_CONCRETE, TEX_DIRT = 0, 1, 2, 3, 4
TEX_WINDOWS, TEX_FOLIAGE, TEX_RANDOM = 5, 6, 7
TEX_POTHOLE, TEX_CRACK, TEX_OIL = 8, 9, 10
TEXTURE_IDS = {
    "none": TEX_NONE, "asphalt": TEX_ASPHALT, "grass": TEX_GRASS, "concrete": TEX_CONCRETE, "dirt": TEX_DIRT,
    "windows": TEX_WINDOWS, "foliage": TEX_FOLIAGE, "random": TEX_RANDOM,
    "pothole": TEX_POTHOLE, "crack": TEX_CRACK, "oil_spill": TEX_OIL,
}


# -- color temperature ----------------------------------------------------------

def blackbody_rgb(kelvin: float) -> tuple[float, float, float]:
    """RGB in [0, 1] for a color temperature, after Tanner Helland's curve fit (1000-40000 K).

    Coefficients: R = 329.698727446 (T-60)^-0.1332047592 for T > 66,
    G = 99.4708025861 ln T - 161.1195681661 for T <= 66 else
    288.1221695283 (T-60)^-0.0755148492, B = 138.5177312231 ln(T-10) - 305.0447927307
    for 19 < T < 66, with T = kelvin / 100.
    """
    t = min(max(kelvin, 1000.0), 40000.0) / 100.0
    if t <= 66:
        r = 255.0
        g = 99.4708025861 * math.log(t) - 161.1195681661
    else:
        r = 329.698727446 * (t - 60) ** -0.1332047592
        g = 288.1221695283 * (t - 60) ** -0.0755148492
    if t >= 66:
        b = 255.0
    elif t <= 19:
        b = 0.0
    else:
        b = 138.5177312231 * math.log(t - 10) - 305.0447927307
    return tuple(min(max(c, 0.0), 255.0) / 255.0 for c in (r, g, b))


# -- lighting ------------------------------------------------------------------------

@dataclass(frozen=True)
class Lighting:
    sun_direction: tuple[float, float, float]  # direction light travels, unit
    sun_rgb: tuple[float, float, float]
    ambient_rgb: tuple[float, float, float]
    sky_color: tuple[float, float, float] = (0.55, 0.72, 0.95)
    cloud_density: float = 0.0
    cloud_seed: int = 0

    def __post_init__(self):
        if min(self.sun_rgb) < 0 or min(self.ambient_rgb) < 0:
            raise ValueError("light colors must be non-negative")

    @classmethod
    def from_globals(cls, g) -> "Lighting":
        az, el = math.radians(g.sun_azimuth), math.radians(g.sun_elevation)
        to_sun = (math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el))
        # fade the sun out as it sinks through the horizon
        fade = min(max((g.sun_elevation + 5.0) / 10.0, 0.0), 1.0)
        bb = blackbody_rgb(g.sun_color_temperature)
        sun = tuple(c * g.sun_intensity * SUN_SCALE * fade for c in bb)
        sky = tuple(float(c) for c in g.sky_color)
        return cls(sun_direction=tuple(-c for c in to_sun), sun_rgb=sun,
                   ambient_rgb=tuple(c * AMBIENT_SCALE for c in sky), sky_color=sky,
                   cloud_density=g.cloud_density, cloud_seed=int(g.cloud_seed))

    def arrays(self):
        return (np.array(self.sun_direction, dtype=np.float64), np.array(self.sun_rgb, dtype=np.float64),
                np.array(self.ambient_rgb, dtype=np.float64))


def shininess(roughness: float) -> float:
    return 2.0 + (1.0 - roughness) ** 2 * 254.0


@nb.njit(cache=True)
def shade_px(n, albedo, roughness, metallic, sun_dir, sun_rgb, ambient, view, use_spec, out):
    """Shade one point; ``view`` points from the surface towards the eye."""
    ndl = -(n[0] * sun_dir[0] + n[1] * sun_dir[1] + n[2] * sun_dir[2])
    if ndl < 0.0:
        ndl = 0.0
    spec = 0.0
    if use_spec and ndl > 0.0:
        hx, hy, hz = view[0] - sun_dir[0], view[1] - sun_dir[1], view[2] - sun_dir[2]
        hn = math.sqrt(hx * hx + hy * hy + hz * hz)
        if hn > 0.0:
            ndh = (n[0] * hx + n[1] * hy + n[2] * hz) / hn
            if ndh > 0.0:
                spec = (1.0 - roughness) * ndh ** (2.0 + (1.0 - roughness) ** 2 * 254.0)
    for k in range(3):
        tint = SPEC_F0 + (albedo[k] - SPEC_F0) * metallic
        out[k] = albedo[k] * (ambient[k] + sun_rgb[k] * ndl) + sun_rgb[k] * tint * spec


def shade(normal, material, lighting: Lighting, view_dir=None) -> np.ndarray:
    """Linear RGB for one surface point; no specular term when ``view_dir`` is None.

    ``material`` is a :class:`~sdrgen.assets.Material` or a plain albedo triple
    (then roughness 1, metallic 0).
    """
    if hasattr(material, "albedo"):
        albedo, rough, metal = material.albedo, material.roughness, material.metallic
    else:
        albedo, rough, metal = material, 1.0, 0.0
    n = np.asarray(normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    view = np.zeros(3) if view_dir is None else np.asarray(view_dir, dtype=np.float64)
    if view_dir is not None:
        view = view / np.linalg.norm(view)
    out = np.zeros(3)
    sd, sr, amb = lighting.arrays()
    shade_px(n, np.asarray(albedo, dtype=np.float64), float(rough), float(metal), sd, sr, amb, view,
             view_dir is not None, out)
    return out


# -- post ------------------------------------------------------------------------------

@dataclass(frozen=True)
class PostParams:
    contrast: float = 150.0  # percent of normal
    saturation: float = 1.0

    def __post_init__(self):
        if self.contrast <= 0:
            raise ValueError("contrast must be positive")
        if self.saturation < 0:
            raise ValueError("saturation must be non-negative")


LUMA = np.array([0.299, 0.587, 0.114])


def apply_post(rgb, post: PostParams) -> np.ndarray:
    """Contrast about mid-gray, then saturation about Rec.601 luma; both clamped to [0, 1]."""
    c = np.clip(0.5 + (np.asarray(rgb, dtype=np.float64) - 0.5) * (post.contrast / 100.0), 0.0, 1.0)
    gray = (c @ LUMA)[..., None]
    return np.clip(gray + (c - gray) * post.saturation, 0.0, 1.0)


def to_uint8(rgb: np.ndarray) -> np.ndarray:
    return np.floor(np.clip(rgb, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


# -- noise ------------------------------------------------------------------------------

@nb.njit(cache=True)
def _hash(ix, iy, seed):
    h = np.uint64(ix & 0xFFFFFFFF) * np.uint64(0x9E3779B97F4A7C15)
    h ^= np.uint64(iy & 0xFFFFFFFF) * np.uint64(0xC2B2AE3D27D4EB4F)
    h ^= np.uint64(seed & 0xFFFFFFFF) * np.uint64(0x165667B19E3779F9)
    h ^= h >> np.uint64(33)
    h *= np.uint64(0xFF51AFD7ED558CCD)
    h ^= h >> np.uint64(33)
    h *= np.uint64(0xC4CEB9FE1A85EC53)
    h ^= h >> np.uint64(33)
    return float(h >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True)
def value_noise(x, y, seed):
    """Smooth value noise in [0, 1) with unit lattice spacing."""
    fx, fy = math.floor(x), math.floor(y)
    ix, iy = int(fx), int(fy)
    tx, ty = x - fx, y - fy
    tx = tx * tx * (3.0 - 2.0 * tx)
    ty = ty * ty * (3.0 - 2.0 * ty)
    a = _hash(ix, iy, seed)
    b = _hash(ix + 1, iy, seed)
    c = _hash(ix, iy + 1, seed)
    d = _hash(ix + 1, iy + 1, seed)
    return (a + (b - a) * tx) + ((c + (d - c) * tx) - (a + (b - a) * tx)) * ty


@nb.njit(cache=True)
def fbm(x, y, seed, octaves):
    total, amp, norm = 0.0, 0.5, 0.0
    for o in range(octaves):
        total += amp * value_noise(x, y, seed + 7919 * o)
        norm += amp
        x, y = x * 2.03 + 17.1, y * 2.03 - 5.7
        amp *= 0.5
    return total / norm


@nb.njit(cache=True)
def _smooth(e0, e1, x):
    t = (x - e0) / (e1 - e0)
    t = min(max(t, 0.0), 1.0)
    return t * t * (3.0 - 2.0 * t)


@nb.njit(cache=True)
def texture_px(tex, seed, wx, wy, wz, lx, ly, lz, nx, ny, nz, scale, albedo, second, out):
    """Albedo at one point.  ``w*`` world, ``l*`` object-local, ``n*`` local normal."""
    for k in range(3):
        out[k] = albedo[k]
    if tex == TEX_NONE:
        return
    if tex == TEX_ASPHALT or tex == TEX_POTHOLE or tex == TEX_CRACK or tex == TEX_OIL:
        f = 0.88 + 0.24 * value_noise(wx * 6.0, wy * 6.0, seed) + 0.12 * (fbm(wx * 0.15, wy * 0.15, seed + 1, 3)
                                                                            - 0.5)
        for k in range(3):
            out[k] = albedo[k] * f
        if tex == TEX_ASPHALT:
            return
        # decals: blend towards the secondary color (already mixed by intensity) inside a mask
        u, v = lx / scale, ly / scale
        if tex == TEX_POTHOLE:
            r = math.sqrt(u * u + v * v) * 2.0 + 0.35 * (fbm(u * 3.0, v * 3.0, seed, 2) - 0.5)
            m = 1.0 - _smooth(0.75, 0.95, r)
        elif tex == TEX_CRACK:
            wob = 0.08 * (fbm(u * 4.0, 0.5, seed, 3) - 0.5)
            m = (1.0 - _smooth(0.015, 0.04, abs(v - wob))) * (1.0 - _smooth(0.4, 0.5, abs(u)))
        else:
            r = math.sqrt(u * u + v * v) * 2.0 + 0.6 * (fbm(u * 2.0, v * 2.0, seed, 3) - 0.5)
            m = 1.0 - _smooth(0.6, 0.9, r)
        for k in range(3):
            out[k] = out[k] + (second[k] - out[k]) * m
        return
    if tex == TEX_GRASS:
        n1 = fbm(wx * 0.4, wy * 0.4, seed, 3)
        n2 = value_noise(wx * 9.0, wy * 9.0, seed + 3)
        f = 0.8 + 0.4 * n2
        for k in range(3):
            out[k] = (albedo[k] + (second[k] - albedo[k]) * _smooth(0.45, 0.8, n1) * 0.6) * f
        return
    if tex == TEX_CONCRETE:
        f = 0.9 + 0.12 * value_noise(wx * 4.0, wy * 4.0, seed) + 0.1 * (fbm(wx * 0.3, wy * 0.3, seed + 1, 2)
                                                                          - 0.5)
        for k in range(3):
            out[k] = albedo[k] * f
        return
    if tex == TEX_DIRT:
        f = 0.75 + 0.5 * fbm(wx * 0.7, wy * 0.7, seed, 4)
        for k in range(3):
            out[k] = albedo[k] * f
        return
    if tex == TEX_WINDOWS:
        # window grid on walls; floors 3 m, bays 2.5 m along the face
        if abs(nz) > 0.5 or lz < 0.8:
            return
        h = lx * -ny + ly * nx
        fu = h / 2.5 - math.floor(h / 2.5)
        fv = lz / 3.0 - math.floor(lz / 3.0)
        if 0.22 < fu < 0.78 and 0.3 < fv < 0.8:
            lit = _hash(int(math.floor(h / 2.5)), int(math.floor(lz / 3.0)), seed)
            g = 0.06 + 0.12 * lit
            out[0], out[1], out[2] = g, g * 1.05, g * 1.15
        return
    if tex == TEX_FOLIAGE:
        f = 0.6 + 0.8 * fbm(lx * 1.7 + lz, ly * 1.7 - lz, seed, 3)
        for k in range(3):
            out[k] = albedo[k] * f
        return
    if tex == TEX_RANDOM:
        s = 0.5 + 4.0 * _hash(1, 2, seed)
        m = fbm(lx * s + lz * 0.7, ly * s - lz * 1.3, seed, 3)
        stripes = _hash(3, 4, seed) < 0.3
        if stripes:
            m = 0.5 + 0.5 * math.sin((lx + lz) * s * 6.0)
        for k in range(3):
            out[k] = albedo[k] + (second[k] - albedo[k]) * _smooth(0.35, 0.65, m)
        return


@nb.njit(cache=True)
def sky_px(dx, dy, dz, sky, density, seed, out):
    """Sky color along the world-space view direction (dx, dy, dz)."""
    horizon = 1.0 - min(max(dz, 0.0), 1.0)
    for k in range(3):
        out[k] = sky[k] + (1.0 - sky[k]) * 0.35 * horizon ** 4
    if dz <= 0.02 or density <= 0.0:
        return
    # clouds on a plane: coordinates are the ray's hit point at unit height
    u, v = dx / dz, dy / dz
    n = fbm(u * 1.5, v * 1.5, seed, 5)
    m = _smooth(1.0 - density, 1.0 - density + 0.25, n) * _smooth(0.02, 0.15, dz)
    shade = 0.78 + 0.2 * fbm(u * 4.0, v * 4.0, seed + 11, 2)
    for k in range(3):
        out[k] = out[k] + (shade - out[k]) * m
