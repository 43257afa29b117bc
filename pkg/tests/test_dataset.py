import json
import os

import numpy as np
import pytest

from sdrgen.dataset import (MANIFEST, SUBDIRS, DatasetError, compute_stats, format_stats, frame_paths,
                            generate_dataset, read_manifest, read_png, resolve_workers)
from sdrgen.errors import ConfigError
from sdrgen.labels import KittiRecord, write_kitti_label
from sdrgen.pipeline import generate_frame, post_params

from conftest import make_config


def tree_bytes(root):
    """Every file's bytes, with manifest wall times removed."""
    out = {}
    for dirpath, _, files in os.walk(root):
        for f in files:
            p = os.path.join(dirpath, f)
            rel = os.path.relpath(p, root)
            data = open(p, "rb").read()
            if f == MANIFEST:
                recs = [json.loads(l) for l in data.splitlines()]
                for r in recs:
                    r.pop("wall_time", None)
                data = json.dumps(recs, sort_keys=True).encode()
            out[rel] = data
    return out


def test_layout_and_manifest(tmp_path):
    cfg = make_config(frame_count=3, master_seed=42)
    summary = generate_dataset(cfg, tmp_path)
    assert summary.generated == [0, 1, 2]
    for i in range(3):
        for kind, p in frame_paths(tmp_path, i).items():
            assert p.exists() and p.name.startswith(f"{i:06d}.")
    header, records = read_manifest(tmp_path / MANIFEST)
    assert header["config_hash"] == cfg.hash and header["prng"]
    assert sorted(records) == [0, 1, 2]
    assert records[0]["master_seed"] == 42


def test_buffers_round_trip_through_png(tmp_path):
    cfg = make_config(frame_count=1, master_seed=3)
    generate_dataset(cfg, tmp_path)
    res = generate_frame(cfg, 0)
    p = frame_paths(tmp_path, 0)
    np.testing.assert_array_equal(read_png(p["images"]), res.buffers.rgb)
    np.testing.assert_array_equal(read_png(p["instance"]), res.buffers.instance)
    depth = read_png(p["depth"])
    assert depth.dtype == np.uint16
    finite = np.isfinite(res.buffers.depth)
    assert np.all(depth[~finite] == 65535)
    assert np.all(np.abs(depth[finite] / 100.0 - np.minimum(res.buffers.depth[finite], 655.35)) <= 0.005 + 1e-6)


def test_two_runs_identical(tmp_path):
    cfg = make_config(frame_count=4, master_seed=42)
    generate_dataset(cfg, tmp_path / "a")
    generate_dataset(cfg, tmp_path / "b")
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")


def test_frame_order_irrelevant():
    cfg = make_config(master_seed=42)
    forward = [generate_frame(cfg, i).buffers.rgb for i in range(3)]
    backward = [generate_frame(cfg, i).buffers.rgb for i in reversed(range(3))][::-1]
    for a, b in zip(forward, backward):
        np.testing.assert_array_equal(a, b)


def test_resume_skips_complete_frames(tmp_path):
    generate_dataset(make_config(frame_count=5, master_seed=1), tmp_path)
    before = {i: frame_paths(tmp_path, i)["images"].stat().st_mtime_ns for i in range(5)}
    summary = generate_dataset(make_config(frame_count=10, master_seed=1), tmp_path)
    assert summary.skipped == [0, 1, 2, 3, 4]
    assert summary.generated == [5, 6, 7, 8, 9]
    assert {i: frame_paths(tmp_path, i)["images"].stat().st_mtime_ns for i in range(5)} == before
    assert sorted(read_manifest(tmp_path / MANIFEST)[1]) == list(range(10))


def test_interrupted_run_resumes(tmp_path):
    cfg = make_config(frame_count=6, master_seed=2)
    run, fresh = tmp_path / "run", tmp_path / "fresh"
    first = generate_dataset(cfg, run, limit=3)
    assert first.generated == [0, 1, 2]
    # a crash mid-frame leaves some files of frame 3 and a temporary behind
    frame_paths(run, 3)["images"].write_bytes(b"partial")
    (run / "labels" / ".000003.txt.abc.tmp").write_bytes(b"x")
    second = generate_dataset(cfg, run)
    assert second.removed_partial == [3]
    assert second.generated == [3, 4, 5]
    generate_dataset(cfg, fresh)
    assert tree_bytes(run) == tree_bytes(fresh)


def test_different_config_refused(tmp_path):
    generate_dataset(make_config(frame_count=1, master_seed=1), tmp_path)
    with pytest.raises(DatasetError):
        generate_dataset(make_config(frame_count=1, master_seed=2), tmp_path)


def test_multiprocess_matches_serial(tmp_path):
    cfg = make_config(frame_count=4, master_seed=5)
    generate_dataset(cfg, tmp_path / "a", workers=1)
    generate_dataset(cfg, tmp_path / "b", workers=2)
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")


def test_resolve_workers(monkeypatch):
    cfg = make_config(workers=3)
    monkeypatch.delenv("SDRGEN_WORKERS", raising=False)
    assert resolve_workers(None, cfg) == 3
    monkeypatch.setenv("SDRGEN_WORKERS", "5")
    assert resolve_workers(None, cfg) == 5
    assert resolve_workers(2, cfg) == 2
    monkeypatch.setenv("SDRGEN_WORKERS", "many")
    with pytest.raises(ConfigError):
        resolve_workers(None, cfg)


def test_ablation_c_has_no_splines(tmp_path):
    generate_dataset(make_config(frame_count=3, ablation=["C"]), tmp_path)
    _, records = read_manifest(tmp_path / MANIFEST)
    assert all(r["context_splines"] == 0 for r in records.values())


def test_post_params_ablations():
    assert post_params(make_config(ablation=["RS"]), 0).saturation == 1.0
    assert post_params(make_config(ablation=["HC"]), 0).contrast == 100.0
    p = post_params(make_config(), 0)
    assert 0.5 <= p.saturation <= 1.5 and p.contrast == 150.0


# -- stats --------------------------------------------------------------------------------

def constructed(tmp_path, records):
    for d in SUBDIRS:
        (tmp_path / d).mkdir(parents=True, exist_ok=True)
    for i, recs in enumerate(records):
        write_kitti_label(recs, tmp_path / "labels" / f"{i:06d}.txt")
    return tmp_path


def rec(height, occ=0, trunc=0.0):
    return KittiRecord("Car", trunc, occ, 0.0, (10.0, 20.0, 60.0, 20.0 + height), (1.5, 1.8, 4.0),
                       (0.0, 1.6, 10.0), 0.0)


def test_stats_single_easy_label(tmp_path):
    s = compute_stats(constructed(tmp_path, [[rec(50)]]))
    assert s["buckets"] == {"Easy": 1, "Moderate": 1, "Hard": 1}
    assert s["class_counts"] == {"Car": 1}
    assert sum(s["height_hist"]) == 1 and s["height_hist"][2] == 1  # 50 px falls in [50, 75)


def test_stats_moderate_only(tmp_path):
    s = compute_stats(constructed(tmp_path, [[rec(39)]]))
    assert s["buckets"] == {"Easy": 0, "Moderate": 1, "Hard": 1}


def test_stats_empty_frames(tmp_path):
    s = compute_stats(constructed(tmp_path, [[], [], []]))
    assert s["frames"] == 3 and s["labels"] == 0 and s["class_counts"] == {}
    assert "(none)" in format_stats(s)


def test_stats_missing_labels(tmp_path):
    with pytest.raises(FileNotFoundError):
        compute_stats(tmp_path)


def test_stats_on_generated(tmp_path):
    generate_dataset(make_config(frame_count=6, master_seed=8), tmp_path)
    s = compute_stats(tmp_path)
    assert sum(s["scenario_counts"].values()) == 6
    b = s["buckets"]
    assert b["Easy"] <= b["Moderate"] <= b["Hard"]
    assert len(s["height_hist"]) == 16 and len(s["occlusion_hist"]) == 10
