"""On-disk dataset layout, manifest, parallel generation, preview and statistics.

Layout under the output directory::

    images/NNNNNN.png    8-bit RGB
    depth/NNNNNN.png     16-bit centimeters, 65535 = sky or beyond range
    instance/NNNNNN.png  16-bit instance ids, 0 = background
    labels/NNNNNN.txt    KITTI object labels
    manifest.jsonl       header line, then one record per frame
    config.json          effective configuration

Every file is written to a temporary name and renamed into place.  A frame
is complete when it has a manifest record and all four files; anything else
found on resume is deleted and regenerated.
"""

from __future__ import annotations

import io
import json
import multiprocessing as mp
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from PIL import Image

from . import __version__
from .config import Config, DEFAULTS, config_from_dict
from .errors import ConfigError
from .labels import (BUCKETS, DifficultyThresholds, KittiRecord, atomic_write, bucket_counts, format_record,
                     parse_kitti_label, write_kitti_label)
from .pipeline import FrameResult, generate_frame
from .render.renderer import encode_depth
from .rng import PRNG_ALGORITHM

SUBDIRS = ("images", "depth", "instance", "labels")
EXTS = {"images": ".png", "depth": ".png", "instance": ".png", "labels": ".txt"}
MANIFEST = "manifest.jsonl"
HEIGHT_EDGES = np.linspace(0.0, 400.0, 17)
FRACTION_EDGES = np.linspace(0.0, 1.0, 11)


class DatasetError(OSError):
    """Output directory problem (I/O or a dataset from another config)."""


def frame_name(index: int) -> str:
    return f"{index:06d}"


def frame_paths(out: Path, index: int) -> dict[str, Path]:
    return {d: out / d / (frame_name(index) + EXTS[d]) for d in SUBDIRS}


def png_bytes(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(array).save(buf, format="PNG", compress_level=1)
    return buf.getvalue()


def read_png(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im)
    return arr.astype(np.uint16) if arr.dtype.kind in "iu" and arr.ndim == 2 else arr


def frame_record(result: FrameResult, cfg: Config) -> dict:
    g = result.scene.globals
    return {
        "type": "frame",
        "frame_index": result.index,
        "master_seed": cfg.master_seed,
        "mode": result.scene.mode,
        "scenario": result.scene.scenario.name,
        "setting": result.scene.scenario.setting,
        "object_count": len(result.scene.objects),
        "label_count": len(result.labels),
        "context_splines": len(result.scene.splines),
        "post": {"contrast": result.post.contrast, "saturation": result.post.saturation},
        "light": {"sun_azimuth": g.sun_azimuth, "sun_elevation": g.sun_elevation,
                  "sun_color_temperature": g.sun_color_temperature, "sun_intensity": g.sun_intensity,
                  "sky_color": list(g.sky_color)},
        "pose_kinds": sorted({o.pose_kind for o in result.scene.objects}),
        "objects": [l.to_dict() for l in result.labels],
        "wall_time": round(result.seconds, 4),
    }


def write_frame(result: FrameResult, out: Path) -> None:
    paths = frame_paths(out, result.index)
    b = result.buffers
    atomic_write(paths["images"], png_bytes(b.rgb))
    atomic_write(paths["depth"], png_bytes(encode_depth(b.depth)))
    atomic_write(paths["instance"], png_bytes(b.instance))
    write_kitti_label(result.records(), paths["labels"])


# -- manifest ---------------------------------------------------------------------------

def manifest_header(cfg: Config) -> dict:
    return {"type": "header", "config_hash": cfg.hash, "tool_version": __version__, "prng": PRNG_ALGORITHM,
            "mode": cfg.mode, "ablation": cfg.ablation.codes(), "resolution": list(cfg.resolution),
            "master_seed": cfg.master_seed}


def read_manifest(path: Path) -> tuple[dict | None, dict[int, dict]]:
    header, records = None, {}
    if not path.exists():
        return header, records
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                continue  # torn final line after a crash
            if rec.get("type") == "header":
                header = rec
            elif rec.get("type") == "frame":
                records[int(rec["frame_index"])] = rec
    return header, records


def _write_manifest(path: Path, header: dict, records: dict[int, dict]) -> None:
    lines = [json.dumps(header, sort_keys=True)] + [json.dumps(records[i], sort_keys=True) for i in sorted(records)]
    atomic_write(path, ("\n".join(lines) + "\n").encode())


def _complete(out: Path, index: int) -> bool:
    return all(p.exists() for p in frame_paths(out, index).values())


def _cleanup_partial(out: Path, keep: set[int]) -> list[int]:
    """Delete frame files (and stray temporaries) that do not belong to a complete frame."""
    removed = set()
    for d in SUBDIRS:
        for f in (out / d).iterdir():
            if f.name.startswith("."):
                f.unlink()
                continue
            stem = f.stem
            if stem.isdigit() and int(stem) not in keep:
                f.unlink()
                removed.add(int(stem))
    return sorted(removed)


# -- generation ------------------------------------------------------------------------

_WORKER_CFG: Config | None = None
_WORKER_OUT: Path | None = None


def _worker_init(cfg: Config, out: str):
    global _WORKER_CFG, _WORKER_OUT
    _WORKER_CFG, _WORKER_OUT = cfg, Path(out)


def _worker_frame(index: int) -> dict:
    result = generate_frame(_WORKER_CFG, index)
    write_frame(result, _WORKER_OUT)
    return frame_record(result, _WORKER_CFG)


def warmup() -> None:
    """Compile the numeric kernels once, so forked workers inherit them."""
    cfg = config_from_dict({"resolution": [16, 8], "frame_count": 1})
    generate_frame(cfg, 0)


def resolve_workers(cli_value: int | None, cfg: Config) -> int:
    if cli_value is not None:
        n = cli_value
    elif os.environ.get("SDRGEN_WORKERS"):
        try:
            n = int(os.environ["SDRGEN_WORKERS"])
        except ValueError:
            raise ConfigError(f"SDRGEN_WORKERS must be an integer, got {os.environ['SDRGEN_WORKERS']!r}") from None
    else:
        n = cfg.workers
    if n < 1:
        raise ConfigError(f"worker count must be >= 1, got {n}")
    return n


@dataclass
class GenerateSummary:
    generated: list[int]
    skipped: list[int]
    removed_partial: list[int]


def generate_dataset(cfg: Config, out_dir: str | os.PathLike | None = None, workers: int = 1,
                     progress: Callable[[dict], None] | None = None, limit: int | None = None) -> GenerateSummary:
    """Generate frames ``0..frame_count-1`` into ``out_dir``, resuming an earlier run.

    ``limit`` stops after that many new frames (used to exercise resume).
    """
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    try:
        for d in SUBDIRS:
            (out / d).mkdir(parents=True, exist_ok=True)
        mpath = out / MANIFEST
        header, records = read_manifest(mpath)
        if header is not None and header.get("config_hash") != cfg.hash:
            raise DatasetError(f"{out} holds a dataset generated from a different config "
                               f"(hash {header.get('config_hash', '?')[:12]})")
        header = manifest_header(cfg)
        done = {i for i in records if _complete(out, i)}
        records = {i: records[i] for i in done}
        removed = _cleanup_partial(out, done)
        _write_manifest(mpath, header, records)
        atomic_write(out / "config.json", (json.dumps(cfg.data, indent=2, sort_keys=True) + "\n").encode())

        pending = [i for i in range(cfg.frame_count) if i not in done]
        if limit is not None:
            pending = pending[:limit]
        generated = []
        with open(mpath, "a", encoding="utf-8") as mf:
            for rec in _run(cfg, out, pending, workers):
                records[rec["frame_index"]] = rec
                mf.write(json.dumps(rec, sort_keys=True) + "\n")
                mf.flush()
                generated.append(rec["frame_index"])
                if progress:
                    progress(rec)
        _write_manifest(mpath, header, records)
    except OSError as exc:
        if isinstance(exc, DatasetError):
            raise
        raise DatasetError(f"I/O error under {out}: {exc}") from exc
    return GenerateSummary(generated=generated, skipped=sorted(done), removed_partial=removed)


def _run(cfg: Config, out: Path, pending: list[int], workers: int) -> Iterable[dict]:
    if not pending:
        return
    if workers <= 1 or len(pending) == 1:
        _worker_init(cfg, str(out))
        for i in pending:
            yield _worker_frame(i)
        return
    warmup()
    ctx = mp.get_context("fork")
    with ctx.Pool(workers, initializer=_worker_init, initargs=(cfg, str(out))) as pool:
        yield from pool.imap(_worker_frame, pending, chunksize=1)


# -- preview -------------------------------------------------------------------------------

def preview(cfg: Config, frame_index: int, out_png: str | os.PathLike) -> tuple[FrameResult, str]:
    """Render one frame with visible boxes drawn on top; returns the result and the label text."""
    result = generate_frame(cfg, frame_index)
    rgb = result.buffers.rgb.copy()
    for label in result.labels:
        if label.visible_bbox is None:
            continue
        l, t, r, b = label.visible_bbox
        color = (255, 40, 40) if label.cls in ("Car", "Truck") else (255, 220, 0)
        rgb[t:b + 1, [l, r]] = color
        rgb[[t, b], l:r + 1] = color
    atomic_write(out_png, png_bytes(rgb))
    text = "".join(format_record(r) + "\n" for r in result.records())
    return result, text


# -- statistics ----------------------------------------------------------------------------

def _thresholds_from(data: dict | None) -> DifficultyThresholds:
    diff = (data or DEFAULTS)["labels"]["difficulty"]
    rule = lambda b: (float(diff[b]["min_height"]), int(diff[b]["max_occlusion_state"]),
                      float(diff[b]["max_truncation"]))
    return DifficultyThresholds(rule("easy"), rule("moderate"), rule("hard"))


def _hist(values, edges) -> list[int]:
    v = np.clip(np.asarray(values, dtype=float), edges[0], edges[-1])
    return np.histogram(v, bins=edges)[0].astype(int).tolist()


def _summary(values) -> dict:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {"n": 0}
    return {"n": int(v.size), "mean": float(v.mean()), "std": float(v.std()), "min": float(v.min()),
            "max": float(v.max())}


def compute_stats(dataset_dir: str | os.PathLike) -> dict:
    """Statistics recomputed from label files, with frame-level tables from the manifest."""
    d = Path(dataset_dir)
    label_dir = d / "labels"
    if not label_dir.is_dir():
        raise FileNotFoundError(f"no labels directory under {d}")
    cfg_data = None
    if (d / "config.json").exists():
        cfg_data = json.loads((d / "config.json").read_text())
    thresholds = _thresholds_from(cfg_data)
    header, records = read_manifest(d / MANIFEST)
    label_files = sorted(label_dir.glob("*.txt"))
    if records:
        missing = [i for i in records if not (label_dir / f"{frame_name(i)}.txt").exists()]
        if missing:
            raise FileNotFoundError(f"label files missing for frames {missing[:5]}")

    labels: list[KittiRecord] = []
    for f in label_files:
        labels.extend(parse_kitti_label(f))
    classes: dict[str, int] = {}
    for r in labels:
        classes[r.type] = classes.get(r.type, 0) + 1
    buckets = bucket_counts([(r.height, r.occluded, r.truncated) for r in labels], thresholds)

    occ = [o["occlusion_fraction"] for r in records.values() for o in r["objects"]]
    scen: dict[str, int] = {}
    settings: dict[str, int] = {}
    for r in records.values():
        scen[r["scenario"]] = scen.get(r["scenario"], 0) + 1
        settings[r["setting"]] = settings.get(r["setting"], 0) + 1
    frames = len(records) if records else len(label_files)
    return {
        "frames": frames,
        "labels": len(labels),
        "class_counts": dict(sorted(classes.items())),
        "height_edges": HEIGHT_EDGES.tolist(),
        "height_hist": _hist([r.height for r in labels], HEIGHT_EDGES),
        "fraction_edges": FRACTION_EDGES.tolist(),
        "occlusion_hist": _hist(occ, FRACTION_EDGES),
        "truncation_hist": _hist([r.truncated for r in labels], FRACTION_EDGES),
        "buckets": buckets,
        "scenario_counts": dict(sorted(scen.items())),
        "setting_counts": dict(sorted(settings.items())),
        "fully_occluded": sum(o["fully_occluded"] for r in records.values() for o in r["objects"]),
        "parameters": {
            "sun_elevation": _summary([r["light"]["sun_elevation"] for r in records.values()]),
            "sun_color_temperature": _summary([r["light"]["sun_color_temperature"] for r in records.values()]),
            "saturation": _summary([r["post"]["saturation"] for r in records.values()]),
            "contrast": _summary([r["post"]["contrast"] for r in records.values()]),
            "context_splines": _summary([r["context_splines"] for r in records.values()]),
        },
        "pose_kinds": sorted({k for r in records.values() for k in r.get("pose_kinds", [])}),
    }


def format_stats(s: dict) -> str:
    out = [f"frames: {s['frames']}    labels: {s['labels']}    fully occluded: {s['fully_occluded']}", "",
           "class counts:"]
    out += [f"  {k:<14}{v:>8}" for k, v in s["class_counts"].items()] or ["  (none)"]
    out += ["", "difficulty (each bucket includes the stricter ones):"]
    out += [f"  {b:<14}{s['buckets'][b]:>8}" for b in BUCKETS]
    out += ["", "bbox height histogram (px):"]
    e = s["height_edges"]
    out += [f"  [{e[i]:>5.0f}, {e[i + 1]:>5.0f}){c:>8}" for i, c in enumerate(s["height_hist"])]
    for name in ("occlusion", "truncation"):
        out += ["", f"{name} fraction histogram:"]
        e = s["fraction_edges"]
        out += [f"  [{e[i]:.1f}, {e[i + 1]:.1f}){c:>8}" for i, c in enumerate(s[f"{name}_hist"])]
    out += ["", "scenario frequency:"]
    total = max(1, sum(s["scenario_counts"].values()))
    out += [f"  {k:<58}{v:>6}  {100 * v / total:5.1f}%" for k, v in s["scenario_counts"].items()]
    out += ["", "per-frame parameters (mean / std):"]
    for k, v in s["parameters"].items():
        if v.get("n"):
            out.append(f"  {k:<24}{v['mean']:>10.3f}{v['std']:>10.3f}")
    return "\n".join(out) + "\n"
