from dataclasses import replace

import pytest

from sdrgen.errors import ConfigError
from sdrgen.pipeline import frame_streams
from sdrgen.rng import make_stream
from sdrgen.road import CenterlineSpline, build_context_splines
from sdrgen.sampling import AblationFlags, DEFAULT_SCENARIOS, sample_globals, with_overrides
from sdrgen.scene import (DRSettings, PlacementSettings, assemble_dr_scene, assemble_scene, place_side_objects,
                          place_vehicles)

from audits import frustum_violations, id_violations, permission_violations, spacing_violations, yaw_violations
from conftest import make_config


@pytest.fixture(scope="module")
def cfg():
    return make_config(master_seed=17)


def scenes(cfg, n, settings=None):
    settings = settings or cfg.scene
    return [assemble_scene(frame_streams(cfg, i), settings) for i in range(n)]


def straight_lane_setup(g, length=200.0):
    center = CenterlineSpline([(x, 0.0) for x in range(0, int(length) + 1, 8)])
    splines = build_context_splines(center, g, make_stream(0, 0, "splines"))
    return [s for s in splines if s.kind == "lane"]


def test_sdr_audits(cfg):
    for sc in scenes(cfg, 150):
        assert permission_violations(sc) == []
        assert spacing_violations(sc, cfg.scene.placement.min_vehicle_offset) == []
        assert id_violations(sc) == []
        n_veh = sum(o.cls in ("car", "truck") for o in sc.objects)
        assert n_veh <= sc.globals.max_vehicles_total
        assert sc.mode == "SDR" and sc.splines


def test_no_multiple_pose_keeps_vehicles_aligned(cfg):
    settings = replace(cfg.scene, ablation=AblationFlags(no_multiple_pose=True))
    for sc in scenes(cfg, 100, settings):
        assert yaw_violations(sc, 5.0) == []
        assert all(o.pose_kind in ("lane", "free") for o in sc.objects)


def test_multiple_pose_produces_other_kinds(cfg):
    kinds = {o.pose_kind for sc in scenes(cfg, 100) for o in sc.objects}
    assert {"lane", "parked", "side_street"} <= kinds


def test_zero_total_gives_no_vehicles():
    g = with_overrides(sample_globals(make_stream(0, 0, "globals"), DEFAULT_SCENARIOS[1]), max_vehicles_total=0,
                       max_vehicles_per_lane=0)
    assert place_vehicles(make_stream(0, 0, "v"), straight_lane_setup(g), g) == []


def test_packing_bound_single_lane():
    g = with_overrides(sample_globals(make_stream(0, 0, "globals"), DEFAULT_SCENARIOS[0]), lane_count=1,
                       max_vehicles_per_lane=40, max_vehicles_total=40)
    lanes = straight_lane_setup(g)
    settings = PlacementSettings(ego_station=0.0, vehicle_station=(0.0, 100.0))
    most = 0
    for seed in range(300):
        placed = place_vehicles(make_stream(seed, 0, "v"), lanes, g, settings=settings)
        stations = sorted(o.station for o in placed)
        assert all(b - a >= 8.0 for a, b in zip(stations, stations[1:]))
        most = max(most, len(placed))
    assert 1 <= most <= 13


def test_no_sidewalk_no_people(cfg):
    for sc in scenes(cfg, 80):
        if not sc.globals.has_sidewalk:
            assert not any(o.cls in ("pedestrian", "cyclist") for o in sc.objects)


def test_structure_spacing(cfg):
    for sc in scenes(cfg, 60):
        by_spline = {}
        for o in sc.objects:
            if o.cls in ("building", "house"):
                by_spline.setdefault(o.owning_spline, []).append(o)
        for objs in by_spline.values():
            for i, a in enumerate(objs):
                for b in objs[i + 1:]:
                    need = (a.asset.nominal_dims[0] + b.asset.nominal_dims[0]) / 2 + 2.0
                    assert abs(a.station - b.station) >= need - 1e-9


def test_determinism(cfg):
    a = assemble_scene(frame_streams(cfg, 3), cfg.scene).to_dict()
    b = assemble_scene(frame_streams(cfg, 3), cfg.scene).to_dict()
    assert a == b


def test_rural_only(cfg):
    settings = replace(cfg.scene, ablation=AblationFlags(sr_setting="rural"))
    assert all(sc.globals.setting == "rural" for sc in scenes(cfg, 100, settings))


def test_side_objects_independent_of_vehicles(cfg):
    # removing every vehicle must leave the side objects unchanged
    sc = assemble_scene(frame_streams(cfg, 5), cfg.scene)
    side = place_side_objects(make_stream(cfg.master_seed, 5, "side"), sc.splines, sc.globals,
                              settings=cfg.scene.placement, ego_station=sc.ego.station)
    assert [o.position for o in side] == [o.position for o in sc.objects if o.cls not in ("car", "truck")]


def test_dr_scenes_inside_frustum(cfg):
    for i in range(200):
        sc = assemble_dr_scene(frame_streams(cfg, i), cfg.scene, resolution=cfg.resolution)
        assert sc.splines == () and sc.mode == "DR"
        assert frustum_violations(sc, cfg.resolution, cfg.scene.dr.depth) == []
        assert id_violations(sc) == []


def test_dr_deterministic(cfg):
    a = assemble_dr_scene(frame_streams(cfg, 4), cfg.scene).to_dict()
    assert a == assemble_dr_scene(frame_streams(cfg, 4), cfg.scene).to_dict()


def test_dr_empty_image_dir(cfg, tmp_path):
    settings = replace(cfg.scene, dr=DRSettings(image_dir=str(tmp_path)))
    with pytest.raises(ConfigError):
        assemble_dr_scene(frame_streams(cfg, 0), settings)
