"""Software renderer: camera model, rasterizer, shading and buffer export."""

from .camera import Camera, project
from .renderer import RenderBuffers, build_scene_mesh, encode_depth, render, render_mesh
from .shading import Lighting, PostParams, apply_post, shade

__all__ = ["Camera", "project", "RenderBuffers", "build_scene_mesh", "encode_depth", "render", "render_mesh",
           "Lighting", "PostParams", "apply_post", "shade"]
