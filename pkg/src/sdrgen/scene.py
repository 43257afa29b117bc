"""Object placement on context splines and full scene assembly.

``assemble_scene`` composes the whole hierarchy for one frame: scenario,
globals, centerline, context splines, then objects on their splines.  Every
level draws from its own labelled stream, and each spline's objects from a
stream forked by spline id, so removing the objects of one spline cannot
change anything else in the scene.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import assets as A
from .errors import ConfigError
from .road import CenterlineSpline, ContextSpline, build_context_splines, frame_at, generate_centerline
from .rng import RngStream
from .sampling import (AblationFlags, GlobalParams, ParamRange, ScenarioSpec, filter_scenarios,
                       sample_globals, sample_range, sample_scenario)

PERMITTED: dict[str, frozenset[str]] = {
    "lane": frozenset({"car", "truck"}),
    "sidewalk": frozenset({"pedestrian", "cyclist"}),
    "side_stretch": frozenset({"building", "house", "tree", "road_sign", *A.FURNITURE_CLASSES}),
    "median": frozenset({"tree", "road_sign"}),
    "gutter": frozenset(),
}

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".gif", ".tif", ".tiff", ".webp")


def _rng(lo, hi):
    return ParamRange.integer(lo, hi)


def _default_side_counts():
    return {
        "buildings": {"building": _rng(6, 16), "house": _rng(0, 2), "tree": _rng(0, 8), "road_sign": _rng(1, 6),
                      "furniture": _rng(2, 10)},
        "houses": {"building": _rng(0, 1), "house": _rng(3, 10), "tree": _rng(3, 15), "road_sign": _rng(0, 4),
                   "furniture": _rng(1, 6)},
        "fields": {"building": _rng(0, 0), "house": _rng(0, 3), "tree": _rng(0, 20), "road_sign": _rng(0, 3),
                   "furniture": _rng(0, 4)},
    }


def _default_sidewalk_counts():
    return {
        "rural": {"pedestrian": _rng(0, 3), "cyclist": _rng(0, 1)},
        "suburban": {"pedestrian": _rng(0, 6), "cyclist": _rng(0, 2)},
        "urban": {"pedestrian": _rng(2, 12), "cyclist": _rng(0, 3)},
    }


@dataclass(frozen=True)
class PlacementSettings:
    ego_station: float = 30.0
    vehicle_station: tuple[float, float] = (5.0, 150.0)
    min_vehicle_offset: float = 8.0
    vehicle_gap: float = 1.0
    truck_share: float = 0.15
    lateral_jitter: float = 0.3
    yaw_jitter: float = 5.0
    parked_probability: float = 0.2
    parked_yaw: float = 20.0
    side_street_probability: float = 0.05
    max_retries: int = 100
    side_station: tuple[float, float] = (-10.0, 250.0)
    spacing: dict = field(default_factory=lambda: {
        "structure_gap": 2.0, "pedestrian": 1.0, "cyclist": 2.0, "tree": 3.0, "road_sign": 10.0, "furniture": 2.0})
    side_counts: dict = field(default_factory=_default_side_counts)
    sidewalk_counts: dict = field(default_factory=_default_sidewalk_counts)
    median_counts: dict = field(default_factory=lambda: {"tree": _rng(0, 6), "road_sign": _rng(0, 2)})
    variant_counts: dict = field(default_factory=lambda: dict(A.VARIANT_COUNTS))
    palette: dict = field(default_factory=lambda: dict(A.PAINT_PALETTE))
    lightness_range: tuple[float, float] = (-0.2, 0.2)


@dataclass(frozen=True)
class DRSettings:
    image_dir: str | None = None
    depth: tuple[float, float] = (5.0, 80.0)
    vehicles: tuple[int, int] = (1, 10)
    distractors: tuple[int, int] = (5, 20)


@dataclass(frozen=True)
class ObjectInstance:
    asset: A.AssetDescriptor
    material: A.Material
    position: tuple[float, float, float]
    yaw: float  # degrees, CCW from world +x
    instance_id: int = 0
    owning_spline: int | None = None
    station: float | None = None
    lateral: float | None = None  # offset from the owning strip's center
    pose_kind: str = "lane"  # lane, parked, side_street, free

    @property
    def cls(self) -> str:
        return self.asset.cls

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id, "class": self.asset.cls, "variant_id": self.asset.variant_id,
            "dims": list(self.asset.nominal_dims), "position": list(self.position), "yaw": self.yaw,
            "owning_spline": self.owning_spline, "station": self.station, "lateral": self.lateral,
            "pose_kind": self.pose_kind,
            "material": {"base_color": list(self.material.base_color),
                         "lightness_delta": self.material.lightness_delta,
                         "roughness": self.material.roughness, "metallic": self.material.metallic,
                         "texture_class": self.material.texture_class,
                         "texture_seed": self.material.texture_seed,
                         "palette_name": self.material.palette_name},
        }


@dataclass(frozen=True)
class EgoPose:
    position: tuple[float, float, float]
    yaw: float
    pitch: float
    fov_horizontal: float
    lane: int | None = None
    station: float | None = None


@dataclass(frozen=True)
class Background:
    """Screen-space backdrop for context-free scenes: procedural noise or an image file."""

    kind: str  # noise or image
    seed: int = 0
    colors: tuple[tuple[float, float, float], ...] = ()
    scale: float = 1.0
    path: str | None = None


@dataclass(frozen=True)
class SceneGraph:
    scenario: ScenarioSpec
    globals: GlobalParams
    splines: tuple[ContextSpline, ...]
    objects: tuple[ObjectInstance, ...]
    ego: EgoPose
    mode: str  # SDR or DR
    centerline: CenterlineSpline | None = None
    background: Background | None = None

    def to_dict(self) -> dict:
        return {
            "mode": self.mode, "scenario": self.scenario.name, "globals": self.globals.to_dict(),
            "centerline": None if self.centerline is None else self.centerline.points.tolist(),
            "splines": [s.to_dict() for s in self.splines],
            "objects": [o.to_dict() for o in self.objects],
            "ego": vars(self.ego),
            "background": None if self.background is None else vars(self.background),
        }


def _span(desc: A.AssetDescriptor) -> float:
    return desc.nominal_dims[0]


def _vehicle_spacing(settings: PlacementSettings, a: float, b: float) -> float:
    return max(settings.min_vehicle_offset, (a + b) / 2 + settings.vehicle_gap)


def _lane_pose(rng: RngStream, lane: ContextSpline, desc: A.AssetDescriptor, settings: PlacementSettings,
               no_multiple_pose: bool):
    """(lateral, yaw offset in degrees, pose kind) for a vehicle in ``lane``."""
    lateral = rng.uniform(-settings.lateral_jitter, settings.lateral_jitter)
    yaw_off = rng.uniform(-settings.yaw_jitter, settings.yaw_jitter)
    u_kind = rng.random()
    u_yaw = rng.uniform(0.0, 360.0)
    u_parked = rng.uniform(-settings.parked_yaw, settings.parked_yaw)
    if no_multiple_pose:
        return lateral, yaw_off, "lane"
    if u_kind < settings.side_street_probability:
        return lateral, u_yaw, "side_street"
    if u_kind < settings.side_street_probability + settings.parked_probability:
        # towards the gutter: right edge for ego lanes, left edge for oncoming lanes
        reach = max(0.0, lane.width / 2 - desc.nominal_dims[1] / 2 - 0.1)
        return (-reach if lane.side < 0 else reach), u_parked, "parked"
    return lateral, yaw_off, "lane"


def place_vehicles(rng: RngStream, lanes: Sequence[ContextSpline], g: GlobalParams, *,
                   settings: PlacementSettings = PlacementSettings(), ego_station: float | None = None,
                   no_multiple_pose: bool = False) -> list[ObjectInstance]:
    """Vehicles per lane with rejection-sampled stations ahead of the ego camera.

    Lanes are visited in random order; each lane draws its own cap in
    ``[0, max_vehicles_per_lane]`` and placement stops once the frame total
    reaches ``max_vehicles_total``.  A slot whose station cannot be placed
    after ``max_retries`` draws is skipped.
    """
    lanes = [l for l in lanes if l.kind == "lane"]
    if not lanes:
        raise ValueError("no lane splines")
    ego = settings.ego_station if ego_station is None else ego_station
    length = lanes[0].centerline.length
    lo = min(max(ego + settings.vehicle_station[0], 0.0), length)
    hi = min(ego + settings.vehicle_station[1], length)
    placed: list[ObjectInstance] = []
    order = rng.shuffled(lanes)
    for lane in order:
        if len(placed) >= g.max_vehicles_total:
            break
        lrng = rng.fork(f"lane{lane.spline_id}")
        n_max = lrng.integers(0, g.max_vehicles_per_lane)
        taken: list[tuple[float, float]] = []  # (station, length)
        for slot in range(n_max):
            if len(placed) >= g.max_vehicles_total:
                break
            vrng = lrng.fork(f"slot{slot}")
            cls = "truck" if vrng.random() < settings.truck_share else "car"
            desc = A.sample_variant(vrng, cls, settings.variant_counts)
            station = None
            for _ in range(settings.max_retries):
                s = vrng.uniform(lo, hi)
                if all(abs(s - t) >= _vehicle_spacing(settings, _span(desc), tl) for t, tl in taken):
                    station = s
                    break
            if station is None:
                continue
            lateral, yaw_off, kind = _lane_pose(vrng, lane, desc, settings, no_multiple_pose)
            fr = frame_at(lane, station, lateral)
            travel = math.degrees(math.atan2(fr.tangent[1], fr.tangent[0])) + (180.0 if lane.direction < 0 else 0.0)
            yaw = yaw_off if kind == "side_street" else travel + yaw_off
            material = A.sample_material(vrng.fork("material"), cls, palette=settings.palette,
                                         lightness_range=settings.lightness_range)
            taken.append((station, _span(desc)))
            placed.append(ObjectInstance(asset=desc, material=material, position=tuple(fr.position.tolist()),
                                         yaw=_wrap_deg(yaw), owning_spline=lane.spline_id, station=station,
                                         lateral=lateral, pose_kind=kind))
    return placed


def _wrap_deg(a: float) -> float:
    return (a + 180.0) % 360.0 - 180.0


def _place_band(rng: RngStream, spline: ContextSpline, items: list[tuple[str, A.AssetDescriptor]],
                station_range: tuple[float, float], lateral_of: Callable[[RngStream, A.AssetDescriptor], float],
                yaw_of: Callable[[RngStream, float, A.AssetDescriptor], float], spacing: Callable[[A.AssetDescriptor,
                                                                                   A.AssetDescriptor], float],
                retries: int) -> list[ObjectInstance]:
    """Rejection-place ``items`` on one lateral band of ``spline``."""
    out: list[ObjectInstance] = []
    taken: list[tuple[float, A.AssetDescriptor]] = []
    for k, (cls, desc) in enumerate(items):
        orng = rng.fork(f"obj{k}")
        station = None
        for _ in range(retries):
            s = orng.uniform(*station_range)
            if all(abs(s - t) >= spacing(desc, d) for t, d in taken):
                station = s
                break
        if station is None:
            continue
        lateral = lateral_of(orng, desc)
        fr = frame_at(spline, station, lateral)
        tangent_deg = math.degrees(math.atan2(fr.tangent[1], fr.tangent[0]))
        material = A.sample_material(orng.fork("material"), cls)
        taken.append((station, desc))
        out.append(ObjectInstance(asset=desc, material=material, position=tuple(fr.position.tolist()),
                                  yaw=_wrap_deg(yaw_of(orng, tangent_deg, desc)), owning_spline=spline.spline_id,
                                  station=station, lateral=lateral, pose_kind="free"))
    return out


def _draw_items(rng: RngStream, counts: dict[str, ParamRange], settings: PlacementSettings,
                furniture: Sequence[str] = A.FURNITURE_CLASSES) -> dict[str, list[tuple[str, A.AssetDescriptor]]]:
    out: dict[str, list] = {}
    for group in sorted(counts):
        n = int(sample_range(rng, counts[group]))
        items = []
        for _ in range(n):
            cls = furniture[rng.integers(0, len(furniture) - 1)] if group == "furniture" else group
            items.append((cls, A.sample_variant(rng, cls, settings.variant_counts)))
        out[group] = items
    return out


def place_side_objects(rng: RngStream, splines: Sequence[ContextSpline], g: GlobalParams, *,
                       settings: PlacementSettings = PlacementSettings(),
                       ego_station: float | None = None) -> list[ObjectInstance]:
    """Pedestrians and cyclists on sidewalks; structures, trees, signs and furniture beside the road."""
    ego = settings.ego_station if ego_station is None else ego_station
    sp = settings.spacing
    out: list[ObjectInstance] = []
    for spline in splines:
        if spline.kind not in ("sidewalk", "median", "side_stretch"):
            continue
        length = spline.centerline.length
        s_range = (min(max(ego + settings.side_station[0], 0.0), length), min(ego + settings.side_station[1], length))
        srng = rng.fork(f"spline{spline.spline_id}")
        half = spline.width / 2
        # +1 when increasing lateral moves away from the road
        away = 1.0 if spline.offset > 0 else -1.0

        if spline.kind == "sidewalk":
            groups = _draw_items(srng.fork("counts"), settings.sidewalk_counts[g.setting], settings)
            people = groups.get("pedestrian", []) + groups.get("cyclist", [])
            out += _place_band(
                srng.fork("people"), spline, people, s_range,
                lambda r, d: r.uniform(-max(0.0, half - d.nominal_dims[1] / 2), max(0.0, half - d.nominal_dims[1] / 2)),
                _person_yaw,
                lambda a, b: max(sp.get(a.cls, 1.0), sp.get(b.cls, 1.0)), settings.max_retries)
        elif spline.kind == "median":
            groups = _draw_items(srng.fork("counts"), settings.median_counts, settings)
            trees = [(c, d) for c, d in groups.get("tree", []) if d.nominal_dims[1] <= spline.width]
            items = trees + groups.get("road_sign", [])
            out += _place_band(srng.fork("median"), spline, items, s_range,
                               lambda r, d: r.uniform(-max(0.0, half - d.nominal_dims[1] / 2),
                                                      max(0.0, half - d.nominal_dims[1] / 2)),
                               lambda r, t, d: t + 180.0 if r.random() < 0.5 else t,
                               lambda a, b: max(sp.get(a.cls, 3.0), sp.get(b.cls, 3.0)), settings.max_retries)
        else:
            groups = _draw_items(srng.fork("counts"), settings.side_counts[g.side_stretch_style], settings)
            inner_edge = -away * half  # strip-relative lateral of the road-side edge

            def band(lo, hi):
                lo_c, hi_c = min(lo, spline.width), min(hi, spline.width)
                return lambda r, d: inner_edge + away * r.uniform(lo_c, max(lo_c, hi_c))

            def facing(r, t, d):
                return t + r.uniform(-3.0, 3.0)

            furniture = groups.get("road_sign", []) + groups.get("furniture", [])
            out += _place_band(
                srng.fork("furniture"), spline, furniture, s_range, band(0.5, 2.5),
                lambda r, t, d: t + 180.0 + r.uniform(-5.0, 5.0),
                lambda a, b: max(sp.get(a.cls, sp["furniture"]), sp.get(b.cls, sp["furniture"]),
                                 (_span(a) + _span(b)) / 2 + 0.5),
                settings.max_retries)
            out += _place_band(srng.fork("trees"), spline, groups.get("tree", []), s_range,
                               band(3.0, 7.0), lambda r, t, d: r.uniform(0.0, 360.0),
                               lambda a, b: sp["tree"], settings.max_retries)
            structures = groups.get("building", []) + groups.get("house", [])

            def setback(r, d):
                depth = d.nominal_dims[1]
                front = min(8.0, max(0.0, spline.width - depth)) + r.uniform(0.0, 2.0)
                return float(np.clip(inner_edge + away * (front + depth / 2), -half, half))

            out += _place_band(srng.fork("structures"), spline, structures, s_range, setback, facing,
                               lambda a, b: (_span(a) + _span(b)) / 2 + sp["structure_gap"], settings.max_retries)
    return out


def _person_yaw(rng: RngStream, tangent_deg: float, desc: A.AssetDescriptor) -> float:
    # cyclists ride along the sidewalk; pedestrians face anywhere
    if desc.cls == "cyclist":
        return tangent_deg + (180.0 if rng.random() < 0.5 else 0.0)
    return rng.uniform(0.0, 360.0)


def _ego_pose(rng: RngStream, splines: Sequence[ContextSpline], g: GlobalParams,
              settings: PlacementSettings) -> EgoPose:
    ego_lanes = [s for s in splines if s.kind == "lane" and s.direction > 0]
    lane = ego_lanes[rng.integers(0, len(ego_lanes) - 1)]
    station = min(settings.ego_station, lane.centerline.length)
    fr = frame_at(lane, station, 0.0)
    heading = math.degrees(math.atan2(fr.tangent[1], fr.tangent[0]))
    return EgoPose(position=(float(fr.position[0]), float(fr.position[1]), g.camera_height),
                   yaw=heading + g.camera_yaw, pitch=g.camera_pitch, fov_horizontal=g.camera_fov_horizontal,
                   lane=lane.spline_id, station=station)


def _with_ids(objects: Sequence[ObjectInstance]) -> tuple[ObjectInstance, ...]:
    return tuple(replace(o, instance_id=i + 1) for i, o in enumerate(objects))


@dataclass(frozen=True)
class SceneSettings:
    """Everything scene assembly needs beyond the per-frame streams."""

    scenarios: tuple[ScenarioSpec, ...]
    ranges: dict
    ablation: AblationFlags = AblationFlags()
    placement: PlacementSettings = PlacementSettings()
    dr: DRSettings = DRSettings()
    n_control_points: int = 100
    segment_length: float = 8.0
    turn_weights: dict = field(default_factory=lambda: {"left": 1.0, "straight": 1.0, "right": 1.0})
    imperfection_density: float = 3.0


def draw_top(streams: Callable[[str], RngStream], settings: SceneSettings) -> tuple[ScenarioSpec, GlobalParams]:
    table = filter_scenarios(settings.scenarios, settings.ablation)
    scenario = sample_scenario(streams("scenario"), table)
    g = sample_globals(streams("globals"), scenario, settings.ablation, settings.ranges)
    return scenario, g


def assemble_scene(streams: Callable[[str], RngStream], settings: SceneSettings) -> SceneGraph:
    """Structured scene: scenario, globals, road, context splines, then objects."""
    scenario, g = draw_top(streams, settings)
    center = generate_centerline(streams("road"), g, n_points=settings.n_control_points,
                                 segment_length=settings.segment_length, turn_weights=settings.turn_weights)
    splines = build_context_splines(center, g, streams("splines"),
                                    imperfection_density=settings.imperfection_density)
    ego = _ego_pose(streams("ego"), splines, g, settings.placement)
    vehicles = place_vehicles(streams("vehicles"), [s for s in splines if s.kind == "lane"], g,
                              settings=settings.placement, ego_station=ego.station,
                              no_multiple_pose=settings.ablation.no_multiple_pose)
    side = place_side_objects(streams("side"), splines, g, settings=settings.placement, ego_station=ego.station)
    return SceneGraph(scenario=scenario, globals=g, splines=tuple(splines), objects=_with_ids(vehicles + side),
                      ego=ego, mode="SDR", centerline=center)


def list_images(image_dir: str | os.PathLike) -> list[str]:
    p = Path(image_dir)
    if not p.is_dir():
        raise ConfigError(f"background image directory {str(p)!r} does not exist")
    files = sorted(str(f) for f in p.iterdir() if f.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise ConfigError(f"background image directory {str(p)!r} contains no images")
    return files


def dr_camera_pose(g: GlobalParams) -> EgoPose:
    return EgoPose(position=(0.0, 0.0, g.camera_height), yaw=g.camera_yaw, pitch=g.camera_pitch,
                   fov_horizontal=g.camera_fov_horizontal)


def assemble_dr_scene(streams: Callable[[str], RngStream], settings: SceneSettings, *,
                      resolution: tuple[int, int] = (1248, 384), distractors: bool = True,
                      random_textures: bool = True) -> SceneGraph:
    """Context-free scene: objects at random poses in the view frustum over a random backdrop.

    With ``distractors=False`` and ``random_textures=False`` this is the
    no-context ablation: same vehicles and lighting, no road structure.
    """
    from .render.camera import Camera

    scenario, g = draw_top(streams, settings)
    ego = dr_camera_pose(g)
    cam = Camera.from_pose(ego, resolution)
    dr = settings.dr
    brng = streams("background")
    if dr.image_dir:
        images = list_images(dr.image_dir)
        background = Background(kind="image", path=images[brng.integers(0, len(images) - 1)])
    else:
        background = Background(kind="noise", seed=brng.integers(0, 2**31 - 1),
                                colors=tuple(A._hsv(brng, (0, 1), (0.1, 1.0), (0.1, 1.0)) for _ in range(3)),
                                scale=brng.uniform(0.5, 3.0))

    orng = streams("dr_objects")
    n_veh = orng.integers(*dr.vehicles)
    n_dis = orng.integers(*dr.distractors) if distractors else 0
    others = [c for c in A.ASSET_CLASSES if c not in A.VEHICLE_CLASSES]
    objects = []
    for k in range(n_veh + n_dis):
        r = orng.fork(f"obj{k}")
        if k < n_veh:
            cls = "truck" if r.random() < settings.placement.truck_share else "car"
        else:
            cls = others[r.integers(0, len(others) - 1)]
        desc = A.sample_variant(r, cls, settings.placement.variant_counts)
        px = r.uniform(0.0, cam.width)
        py = r.uniform(0.0, cam.height)
        depth = r.uniform(*dr.depth)
        center = cam.unproject_pixel(px, py, depth)
        base = center - np.array([0.0, 0.0, desc.nominal_dims[2] / 2])
        material = A.sample_material(r.fork("material"), cls, palette=settings.placement.palette,
                                     lightness_range=settings.placement.lightness_range,
                                     randomized=random_textures)
        objects.append(ObjectInstance(asset=desc, material=material, position=tuple(float(v) for v in base),
                                      yaw=_wrap_deg(r.uniform(0.0, 360.0)), pose_kind="free"))
    return SceneGraph(scenario=scenario, globals=g, splines=(), objects=_with_ids(objects), ego=ego, mode="DR",
                      background=background)
