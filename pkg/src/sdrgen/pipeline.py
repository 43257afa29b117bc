"""One frame end to end: scene, render, labels.

A frame depends only on ``(config, frame_index)``: every random draw comes
from a stream keyed by the master seed, the frame index and a fixed label,
so frames can be produced in any order by any process.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .config import Config
from .labels import ObjectLabel, compute_labels, to_record
from .render.camera import Camera
from .render.renderer import RenderBuffers, SceneMesh, build_scene_mesh, render_mesh
from .render.shading import Lighting, PostParams
from .rng import make_stream
from .sampling import sample_range
from .scene import SceneGraph, assemble_dr_scene, assemble_scene


@dataclass
class FrameResult:
    index: int
    scene: SceneGraph
    camera: Camera
    lighting: Lighting
    post: PostParams
    mesh: SceneMesh
    buffers: RenderBuffers
    labels: list[ObjectLabel]
    seconds: float = 0.0

    def records(self):
        return [to_record(l, self.camera.width, self.camera.height) for l in self.labels]


def frame_streams(cfg: Config, frame_index: int):
    return lambda label: make_stream(cfg.master_seed, frame_index, label)


def post_params(cfg: Config, frame_index: int) -> PostParams:
    """Per-frame contrast and saturation; the saturation draw happens even when pinned."""
    drawn = float(sample_range(make_stream(cfg.master_seed, frame_index, "post"), cfg.saturation))
    saturation = 1.0 if cfg.ablation.no_random_saturation else drawn
    contrast = 100.0 if cfg.ablation.no_high_contrast else cfg.contrast
    return PostParams(contrast=contrast, saturation=saturation)


def build_scene(cfg: Config, frame_index: int) -> SceneGraph:
    streams = frame_streams(cfg, frame_index)
    if cfg.mode == "dr":
        return assemble_dr_scene(streams, cfg.scene, resolution=cfg.resolution)
    if cfg.ablation.no_context:
        return assemble_dr_scene(streams, cfg.scene, resolution=cfg.resolution, distractors=False,
                                 random_textures=False)
    return assemble_scene(streams, cfg.scene)


def generate_frame(cfg: Config, frame_index: int) -> FrameResult:
    if frame_index < 0:
        raise ValueError("frame_index must be non-negative")
    t0 = time.perf_counter()
    scene = build_scene(cfg, frame_index)
    camera = Camera.from_pose(scene.ego, cfg.resolution)
    lighting = Lighting.from_globals(scene.globals)
    post = post_params(cfg, frame_index)
    mesh = build_scene_mesh(scene)
    buffers = render_mesh(mesh, camera, lighting, post, scene.background)
    labels = compute_labels(scene.objects, mesh, camera, buffers.instance, cfg.occlusion_cuts)
    return FrameResult(index=frame_index, scene=scene, camera=camera, lighting=lighting, post=post, mesh=mesh,
                       buffers=buffers, labels=labels, seconds=time.perf_counter() - t0)
