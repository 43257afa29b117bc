"""Acceptance criteria, each checked at its stated tolerance.

Every test appends one PASS/FAIL line to ``conftest.ACCEPTANCE_LINES``; the
lines are printed as they happen and again in the terminal summary.
Expect the whole module to take roughly a quarter of an hour on one core.
"""

import os
import threading
import time
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest

from sdrgen import assets as A
from sdrgen.config import config_from_dict
from sdrgen.dataset import compute_stats, generate_dataset
from sdrgen.labels import DifficultyThresholds, parse_kitti_label, satisfies
from sdrgen.pipeline import frame_streams, generate_frame
from sdrgen.rng import make_stream
from sdrgen.road import build_context_splines, generate_centerline
from sdrgen.sampling import DEFAULT_SCENARIOS, AblationFlags, sample_globals, sample_scenario
from sdrgen.scene import assemble_dr_scene, assemble_scene

from audits import frustum_violations, permission_violations, spacing_violations, yaw_violations
from conftest import ACCEPTANCE_LINES, axis_camera, cam_to_world
from oracles import quad_triangles, raycast, scan_bbox
from test_dataset import tree_bytes
from test_labels import labels_for, square

FULL_RES = [1248, 384]
SEED = 42


def report(key, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  [{key}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def cfg(**kw):
    data = {"master_seed": SEED, "resolution": FULL_RES}
    data.update(kw)
    return config_from_dict(data)


@pytest.fixture(scope="module")
def det_runs(tmp_path_factory):
    """The same 50 full-resolution frames generated twice, once serially and once with 8 workers."""
    root = tmp_path_factory.mktemp("determinism")
    c = cfg(frame_count=50)
    times = []
    for name, workers in (("a", 1), ("b", 8)):
        t0 = time.perf_counter()
        generate_dataset(c, root / name, workers=workers)
        times.append(time.perf_counter() - t0)
    return root / "a", root / "b", times


# -- 1 ---------------------------------------------------------------------------------------

def test_determinism(det_runs):
    a, b, times = det_runs
    ta, tb = tree_bytes(a), tree_bytes(b)
    differing = sorted(k for k in set(ta) | set(tb) if ta.get(k) != tb.get(k))
    ok = not differing and len(ta) == 4 * 50 + 2 and max(times) < 120.0
    report("1", "determinism", ok, f"{len(ta)} files, {len(differing)} differ; runs took "
           f"{times[0]:.1f} s (serial) and {times[1]:.1f} s (8 workers), limit 120 s each")


# -- 2 ---------------------------------------------------------------------------------------

def test_label_oracle():
    c = cfg(master_seed=7, frame_count=1000)
    rng = np.random.default_rng(2024)
    frames = sorted(rng.choice(1000, size=20, replace=False).tolist())
    t0 = time.perf_counter()
    box_bad = boxes = 0
    px_bad = pixels = 0
    worst_depth = 0.0
    for f in frames:
        res = generate_frame(c, f)
        inst, depth, mesh, cam = res.buffers.instance, res.buffers.depth, res.mesh, res.camera
        for lab in res.labels:
            boxes += 1
            box_bad += lab.visible_bbox != scan_bbox(inst, lab.instance_id)
        # every instance that shows up in the buffer has a label with the matching box
        labelled = {l.instance_id for l in res.labels}
        box_bad += len(set(np.unique(inst).tolist()) - {0} - labelled)
        for _ in range(50):
            j, i = int(rng.integers(cam.height)), int(rng.integers(cam.width))
            d, iid = raycast(cam, mesh.tris, mesh.instance, i, j)
            pixels += 1
            if inst[j, i] != iid or np.isinf(d) != np.isinf(depth[j, i]):
                px_bad += 1
            elif np.isfinite(d):
                err = abs(float(depth[j, i]) - d)
                worst_depth = max(worst_depth, err)
                px_bad += err > 1e-3
    elapsed = time.perf_counter() - t0
    ok = box_bad == 0 and px_bad == 0 and pixels == 1000 and elapsed < 300
    report("2", "label oracle", ok, f"{boxes} boxes ({box_bad} mismatched) over {len(frames)} frames; "
           f"{pixels} raycast pixels, {px_bad} mismatched, worst depth error {worst_depth:.2e} m "
           f"(tol 1e-3); {elapsed:.0f} s (limit 300 s)")


# -- 3 ---------------------------------------------------------------------------------------

def test_constructed_scenes():
    cam = axis_camera()
    notes = []
    ok = True

    # target squares of several sizes, each with its left half covered
    for side_px, cx_px in ((100, 0.0), (37, 13.3), (64, -40.7)):
        z = 10.0
        half = side_px / 2 * z / cam.fx
        cx = cx_px * z / cam.fx
        target = square(cx, 0.0, z, half)
        # the cover sits at half the depth, so camera coordinates shrink by half to hit the same pixels
        k = 5.0 / z
        cover = [cam_to_world((k * x, k * y, 5.0)) for x, y in [(cx - 2 * half, -2 * half), (cx, -2 * half),
                                                                (cx, 2 * half), (cx - 2 * half, 2 * half)]]
        labels, _ = labels_for([(2, target), (1, quad_triangles(cover))], cam)
        frac = labels[2].occlusion_fraction
        good = abs(frac - 0.5) <= 2 / side_px
        ok &= good
        notes.append(f"half-covered {side_px}px -> {frac:.4f}")

    # square centered on the left image edge
    z, half = 10.0, 1.0
    edge_x = -cam.cx * z / cam.fx
    labels, _ = labels_for([(1, square(edge_x, 0.0, z, half))], cam)
    trunc = labels[1].truncation
    ok &= abs(trunc - 0.5) <= 1e-6
    notes.append(f"half outside -> truncation {trunc:.8f}")

    # occlusion never decreases as occluders are added in front
    rng = np.random.default_rng(99)
    violations = 0
    for case in range(20):
        target = (1, square(0.0, 0.0, 20.0, 1.0))
        groups = [target]
        prev = 0.0
        for k in range(5):
            occ = square(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(5.0, 18.0),
                         rng.uniform(0.1, 0.8))
            groups.append((k + 2, occ))
            frac = labels_for(groups, cam)[0][1].occlusion_fraction
            violations += frac < prev
            prev = frac
    ok &= violations == 0
    notes.append(f"monotonicity 20 cases x 5 occluders, {violations} decreases")
    report("3", "constructed scenes", ok, "; ".join(notes))


# -- 4 ---------------------------------------------------------------------------------------

def test_road_geometry():
    n = 10_000
    bad_heading = bad_count = 0
    worst_gap = 0.0
    for i in range(n):
        scenario = DEFAULT_SCENARIOS[i % len(DEFAULT_SCENARIOS)]
        g = sample_globals(make_stream(SEED, i, "globals"), scenario)
        center = generate_centerline(make_stream(SEED, i, "road"), g)
        cps = center.control_points
        bad_count += len(cps) != 100
        bad_heading += sum(cp.heading not in (-30.0, 0.0, 30.0) for cp in cps)
        splines = build_context_splines(center, g, make_stream(SEED, i, "splines"))
        p, _, nrm = center.sample(np.linspace(0.0, center.length, 64))
        for a, b in zip(splines, splines[1:]):
            pa = p + a.right_edge * nrm
            pb = p + b.left_edge * nrm
            worst_gap = max(worst_gap, float(np.max(np.linalg.norm(pa - pb, axis=1))))
    ok = bad_heading == 0 and bad_count == 0 and worst_gap < 1e-3
    report("4", "road geometry", ok, f"{n} centerlines: {bad_count} without 100 control points, "
           f"{bad_heading} headings outside {{-30, 0, 30}}; worst strip seam {worst_gap:.2e} m (tol 1e-3)")


# -- 5 ---------------------------------------------------------------------------------------

def test_placement_audits():
    c = cfg(master_seed=11)
    min_off = c.scene.placement.min_vehicle_offset
    spacing = permission = yaw = frustum = 0
    for i in range(10_000):
        sc = assemble_scene(frame_streams(c, i), c.scene)
        spacing += len(spacing_violations(sc, min_off))
        permission += len(permission_violations(sc))
    mp = replace(c.scene, ablation=AblationFlags(no_multiple_pose=True))
    for i in range(10_000):
        sc = assemble_scene(frame_streams(c, i), mp)
        yaw += len(yaw_violations(sc, 5.0))
        spacing += len(spacing_violations(sc, min_off))
    for i in range(1000):
        sc = assemble_dr_scene(frame_streams(c, i), c.scene, resolution=c.resolution)
        frustum += len(frustum_violations(sc, c.resolution, c.scene.dr.depth))
    ok = spacing == permission == yaw == frustum == 0
    report("5", "placement", ok, f"20000 SDR scenes: {spacing} spacing and {permission} permission violations; "
           f"MP ablation: {yaw} yaw violations beyond 5 deg; 1000 DR scenes: {frustum} outside the frustum")


# -- 6 ---------------------------------------------------------------------------------------

def test_distributions():
    n = 100_000
    counts = Counter(sample_scenario(make_stream(SEED, i, "scenario"), DEFAULT_SCENARIOS).name for i in range(n))
    freq = {k: v / n for k, v in counts.items()}
    scen_ok = len(freq) == 20 and all(0.045 <= f <= 0.055 for f in freq.values())
    m = 9000
    paints = Counter(A.sample_material(make_stream(SEED, i, "paint"), "car").palette_name for i in range(m))
    pfreq = {k: v / m for k, v in paints.items()}
    paint_ok = len(pfreq) == 9 and all(0.098 <= f <= 0.124 for f in pfreq.values())
    report("6", "distributions", scen_ok and paint_ok,
           f"scenario frequency {min(freq.values()):.4f}..{max(freq.values()):.4f} over {len(freq)} scenarios "
           f"(need [0.045, 0.055]); paint frequency {min(pfreq.values()):.4f}..{max(pfreq.values()):.4f} "
           f"over {len(pfreq)} colors (need [0.098, 0.124])")


# -- 7 ---------------------------------------------------------------------------------------

def test_difficulty_nesting(det_runs):
    root = det_runs[0]
    s = compute_stats(root)
    b = s["buckets"]
    th = DifficultyThresholds()
    broken = 0
    n = 0
    for f in sorted((root / "labels").glob("*.txt")):
        for r in parse_kitti_label(f):
            n += 1
            e, m, h = (satisfies(r.height, r.occluded, r.truncated, rule) for _, rule in th.items())
            broken += (e and not m) or (m and not h)
    ok = b["Easy"] <= b["Moderate"] <= b["Hard"] and broken == 0 and n > 0
    report("7", "difficulty nesting", ok, f"{n} labels, buckets Easy {b['Easy']} <= Moderate {b['Moderate']} "
           f"<= Hard {b['Hard']}; {broken} labels break per-label nesting")


# -- 8 ---------------------------------------------------------------------------------------

def _tree_rss_bytes(pid):
    """Summed resident set of ``pid`` and all its descendants, from /proc."""
    total = 0
    stack = [pid]
    while stack:
        p = stack.pop()
        try:
            with open(f"/proc/{p}/status") as fh:
                for line in fh:
                    if line.startswith("VmRSS:"):
                        total += int(line.split()[1]) * 1024
            for tid in os.listdir(f"/proc/{p}/task"):
                with open(f"/proc/{p}/task/{tid}/children") as fh:
                    stack.extend(int(c) for c in fh.read().split())
        except (FileNotFoundError, ProcessLookupError):
            continue
    return total


def test_throughput(tmp_path):
    import resource

    c = cfg(frame_count=1000, workers=8)
    peak = [0]
    stop = threading.Event()

    def sample():
        while not stop.is_set():
            peak[0] = max(peak[0], _tree_rss_bytes(os.getpid()))
            stop.wait(0.25)

    th = threading.Thread(target=sample, daemon=True)
    th.start()
    t0 = time.perf_counter()
    try:
        summary = generate_dataset(c, tmp_path / "ds", workers=8)
    finally:
        elapsed = time.perf_counter() - t0
        stop.set()
        th.join()
    self_mb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024
    child_mb = resource.getrusage(resource.RUSAGE_CHILDREN).ru_maxrss / 1024
    bound_mb = self_mb + 8 * child_mb
    peak_mb = peak[0] / 2**20
    ok = len(summary.generated) == 1000 and elapsed <= 600 and peak_mb < 2048
    report("8", "throughput", ok, f"1000 frames at 1248x384 in {elapsed:.0f} s (limit 600 s) on "
           f"{os.cpu_count()} cpu(s) with 8 workers; peak summed RSS {peak_mb:.0f} MB, "
           f"parent+8*max child bound {bound_mb:.0f} MB (limit 2048 MB)")


# -- 9 ---------------------------------------------------------------------------------------

ABLATION_FRAMES = 30
ABLATION_RES = [624, 192]


def ablation_stats(tmp_path, codes):
    c = cfg(master_seed=5, frame_count=ABLATION_FRAMES, resolution=ABLATION_RES, ablation=codes)
    out = tmp_path / ("base" if not codes else "_".join(codes).replace("=", "-"))
    generate_dataset(c, out)
    return compute_stats(out)


def test_ablations(tmp_path):
    base = ablation_stats(tmp_path, [])
    checks = {}
    rl = ablation_stats(tmp_path, ["RL"])["parameters"]["sun_elevation"]
    checks["RL"] = (rl["std"] == 0.0 and base["parameters"]["sun_elevation"]["std"] > 0, f"sun std {rl['std']}")
    rs = ablation_stats(tmp_path, ["RS"])["parameters"]["saturation"]
    checks["RS"] = (rs["min"] == rs["max"] == 1.0, f"saturation {rs['min']}..{rs['max']}")
    sr = ablation_stats(tmp_path, ["SR=rural"])["setting_counts"]
    checks["SR=rural"] = (set(sr) == {"rural"}, f"settings {sorted(sr)}")
    cs = ablation_stats(tmp_path, ["C"])["parameters"]["context_splines"]
    checks["C"] = (cs["max"] == 0 and base["parameters"]["context_splines"]["min"] > 0, f"splines max {cs['max']}")
    hc = ablation_stats(tmp_path, ["HC"])["parameters"]["contrast"]
    checks["HC"] = (hc["min"] == hc["max"] == 100.0 and base["parameters"]["contrast"]["min"] == 150.0,
                    f"contrast {hc['min']}..{hc['max']}")
    kinds = ablation_stats(tmp_path, ["MP"])["pose_kinds"]
    checks["MP"] = (set(kinds) <= {"lane", "free"} and {"parked", "side_street"} <= set(base["pose_kinds"]),
                    f"kinds {kinds} vs baseline {base['pose_kinds']}")
    ok = all(v[0] for v in checks.values())
    report("9", "ablations", ok, f"{ABLATION_FRAMES} frames each at {ABLATION_RES[0]}x{ABLATION_RES[1]}; "
           + "; ".join(f"{k} {'ok' if v[0] else 'BAD'} ({v[1]})" for k, v in checks.items()))
