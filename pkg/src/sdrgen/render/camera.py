"""Pinhole camera.

World: x, y on the ground, z up.  Camera frame: X right, Y up, Z forward, so a
camera-frame point projects to ``x = cx + fx X/Z``, ``y = cy - fy Y/Z``.
Pixel ``(i, j)`` covers ``[i, i+1) x [j, j+1)``; its sample point is the center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_NEAR = 0.1


def rotation(yaw_deg: float, pitch_deg: float) -> np.ndarray:
    """Rows are the camera right, up and forward axes in world coordinates."""
    y, p = math.radians(yaw_deg), math.radians(pitch_deg)
    fwd = np.array([math.cos(y) * math.cos(p), math.sin(y) * math.cos(p), math.sin(p)])
    right = np.array([math.sin(y), -math.cos(y), 0.0])
    up = np.cross(right, fwd)
    return np.stack([right, up, fwd])


@dataclass(frozen=True)
class Camera:
    position: np.ndarray
    yaw: float
    pitch: float
    fov_horizontal: float
    width: int
    height: int
    near: float = DEFAULT_NEAR
    fx: float | None = None
    cx: float | None = None
    cy: float | None = None

    def __post_init__(self):
        if not 10.0 < self.fov_horizontal < 170.0:
            raise ValueError(f"fov {self.fov_horizontal} outside (10, 170)")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("resolution must be positive")
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        if self.fx is None:
            object.__setattr__(self, "fx", (self.width / 2) / math.tan(math.radians(self.fov_horizontal) / 2))
        if self.cx is None:
            object.__setattr__(self, "cx", self.width / 2)
        if self.cy is None:
            object.__setattr__(self, "cy", self.height / 2)
        object.__setattr__(self, "R", rotation(self.yaw, self.pitch))

    @classmethod
    def from_pose(cls, ego, resolution, near: float = DEFAULT_NEAR) -> "Camera":
        w, h = resolution
        return cls(np.asarray(ego.position, dtype=float), ego.yaw, ego.pitch, ego.fov_horizontal, int(w), int(h), near)

    @property
    def fy(self) -> float:
        return self.fx

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    def world_to_camera(self, p) -> np.ndarray:
        return (np.asarray(p, dtype=float) - self.position) @ self.R.T

    def camera_to_world(self, q) -> np.ndarray:
        return np.asarray(q, dtype=float) @ self.R + self.position

    def project_points(self, q) -> np.ndarray:
        """(x, y, depth) for camera-frame points; NaN rows where depth <= near."""
        q = np.asarray(q, dtype=float)
        z = q[..., 2]
        ok = z > self.near
        zs = np.where(ok, z, 1.0)
        x = self.cx + self.fx * q[..., 0] / zs
        y = self.cy - self.fy * q[..., 1] / zs
        out = np.stack([x, y, z], axis=-1)
        out[~ok] = np.nan
        return out

    def unproject(self, x, y, depth) -> np.ndarray:
        """Camera-frame point at pixel coordinate (x, y) and planar depth."""
        x, y, depth = np.asarray(x, float), np.asarray(y, float), np.asarray(depth, float)
        return np.stack([(x - self.cx) / self.fx * depth, -(y - self.cy) / self.fy * depth, depth], axis=-1)

    def unproject_pixel(self, x, y, depth) -> np.ndarray:
        return self.camera_to_world(self.unproject(x, y, depth))

    def pixel_rays(self) -> np.ndarray:
        """Camera-frame ray through every pixel center, scaled to unit depth; shape (H, W, 3)."""
        xs = (np.arange(self.width) + 0.5 - self.cx) / self.fx
        ys = -(np.arange(self.height) + 0.5 - self.cy) / self.fy
        rays = np.empty((self.height, self.width, 3))
        rays[..., 0] = xs[None, :]
        rays[..., 1] = ys[:, None]
        rays[..., 2] = 1.0
        return rays


def project(camera: Camera, point) -> tuple[float, float, float] | None:
    """Project one camera-frame point; ``None`` if it is not in front of the near plane."""
    x, y, z = camera.project_points(np.asarray(point, dtype=float))
    if not np.isfinite(z):
        return None
    return float(x), float(y), float(z)
