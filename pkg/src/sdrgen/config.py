"""YAML configuration: defaults, validation with line numbers, canonical hash.

A config file only needs the keys it changes; everything else comes from
``DEFAULTS``.  Unknown keys are rejected with the line they appear on.  The
canonical hash covers every setting that can change frame content, so it
ignores ``output_dir``, ``workers`` and ``frame_count``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass
from typing import Any, Mapping

import yaml

from . import assets as A
from .errors import ConfigError
from .labels import DifficultyThresholds
from .sampling import (DEFAULT_GLOBAL_RANGES, DEFAULT_SCENARIOS, AblationFlags, ParamRange, ScenarioSpec)
from .scene import DRSettings, PlacementSettings, SceneSettings

MODES = ("sdr", "dr")
HASH_EXCLUDED = ("output_dir", "workers", "frame_count")
WORKERS_ENV = "SDRGEN_WORKERS"

DEFAULTS: dict[str, Any] = {
    "master_seed": 0,
    "frame_count": 100,
    "resolution": [1248, 384],
    "output_dir": "dataset",
    "mode": "sdr",
    "workers": 1,
    "ablation": [],
    "scenarios": "default",
    "ranges": {k: v.to_dict() for k, v in DEFAULT_GLOBAL_RANGES.items()},
    "road": {
        "n_control_points": 100,
        "segment_length": 8.0,
        "turn_weights": {"left": 1.0, "straight": 1.0, "right": 1.0},
        "imperfection_density": 3.0,
    },
    "placement": {
        "ego_station": 30.0,
        "vehicle_station": [5.0, 150.0],
        "min_vehicle_offset": 8.0,
        "vehicle_gap": 1.0,
        "truck_share": 0.15,
        "lateral_jitter": 0.3,
        "yaw_jitter": 5.0,
        "parked_probability": 0.2,
        "side_street_probability": 0.05,
        "max_retries": 100,
        "palette": {k: list(v) for k, v in A.PAINT_PALETTE.items()},
        "lightness_range": [-0.2, 0.2],
        "variant_counts": dict(A.VARIANT_COUNTS),
    },
    "dr": {
        "image_dir": None,
        "depth": [5.0, 80.0],
        "vehicles": [1, 10],
        "distractors": [5, 20],
    },
    "post": {
        "contrast": 150.0,
        "saturation": {"kind": "uniform", "low": 0.5, "high": 1.5},
    },
    "labels": {
        "occlusion_cuts": [0.05, 0.50],
        "difficulty": {
            "easy": {"min_height": 40.0, "max_occlusion_state": 0, "max_truncation": 0.15},
            "moderate": {"min_height": 25.0, "max_occlusion_state": 1, "max_truncation": 0.30},
            "hard": {"min_height": 25.0, "max_occlusion_state": 2, "max_truncation": 0.50},
        },
    },
}

# maps whose keys are free-form (names chosen by the user)
_FREE_KEYS = {("placement", "palette")}


def _is_range(d) -> bool:
    return isinstance(d, dict) and "kind" in d


def _dotted(path) -> str:
    return ".".join(str(p) for p in path) or "<root>"


class _Lines:
    def __init__(self, source: str | None):
        self.source = source
        self.lines: dict[tuple, int] = {}

    def where(self, path) -> str:
        path = tuple(path)
        while path and path not in self.lines:
            path = path[:-1]
        line = self.lines.get(path)
        prefix = self.source or "config"
        return f"{prefix}:{line}" if line else prefix

    def error(self, path, msg) -> ConfigError:
        return ConfigError(f"{self.where(path)}: {_dotted(path)}: {msg}")


def _walk(node, schema, path, lines: _Lines):
    lines.lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _walk(item, None, path + (i,), lines)
        return
    if not isinstance(node, yaml.MappingNode):
        return
    for k_node, v_node in node.value:
        key = k_node.value
        sub = path + (key,)
        if isinstance(schema, dict) and not _is_range(schema) and path not in _FREE_KEYS:
            if key not in schema:
                lines.lines[sub] = k_node.start_mark.line + 1
                raise lines.error(sub, f"unknown key {key!r}")
            _walk(v_node, schema[key], sub, lines)
        else:
            _walk(v_node, None, sub, lines)


def _check_keys(value, schema, path, lines: _Lines):
    """Dict-input counterpart of ``_walk``."""
    if not isinstance(value, Mapping) or not isinstance(schema, dict) or _is_range(schema) \
            or path in _FREE_KEYS:
        return
    for key, v in value.items():
        if key not in schema:
            raise lines.error(path + (key,), f"unknown key {key!r}")
        _check_keys(v, schema[key], path + (key,), lines)


def _merge(base: dict, user: Mapping, schema: dict, path=()) -> dict:
    out = copy.deepcopy(base)
    for k, v in user.items():
        d = schema.get(k) if isinstance(schema, dict) else None
        if isinstance(d, dict) and not _is_range(d) and isinstance(v, Mapping) and path + (k,) not in _FREE_KEYS:
            out[k] = _merge(d, v, d, path + (k,))
        else:
            out[k] = copy.deepcopy(v)
    return out


def canonical_hash(data: Mapping) -> str:
    body = {k: v for k, v in data.items() if k not in HASH_EXCLUDED}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class Config:
    data: dict
    hash: str
    source: str | None
    ablation: AblationFlags
    scene: SceneSettings
    saturation: ParamRange
    thresholds: DifficultyThresholds
    occlusion_cuts: tuple[float, float]

    @property
    def master_seed(self) -> int:
        return self.data["master_seed"]

    @property
    def frame_count(self) -> int:
        return self.data["frame_count"]

    @property
    def resolution(self) -> tuple[int, int]:
        w, h = self.data["resolution"]
        return int(w), int(h)

    @property
    def output_dir(self) -> str:
        return self.data["output_dir"]

    @property
    def mode(self) -> str:
        return self.data["mode"]

    @property
    def workers(self) -> int:
        return self.data["workers"]

    @property
    def contrast(self) -> float:
        return float(self.data["post"]["contrast"])


def _num(lines, path, v, *, integer=False, lo=None, hi=None, lo_open=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (integer and int(v) != v):
        raise lines.error(path, f"expected {'an integer' if integer else 'a number'}, got {v!r}")
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise lines.error(path, f"must be {'>' if lo_open else '>='} {lo}, got {v!r}")
    if hi is not None and v > hi:
        raise lines.error(path, f"must be <= {hi}, got {v!r}")
    return int(v) if integer else float(v)


def _pair(lines, path, v, *, integer=False, lo=None):
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise lines.error(path, f"expected a [low, high] pair, got {v!r}")
    a = _num(lines, path + (0,), v[0], integer=integer, lo=lo)
    b = _num(lines, path + (1,), v[1], integer=integer, lo=lo)
    if a > b:
        raise lines.error(path, f"low {a} > high {b}")
    return a, b


def _ablation_codes(v) -> list[str]:
    if v is None:
        return []
    if isinstance(v, str):
        return [c for c in (p.strip() for p in v.split(",")) if c]
    return [str(c) for c in v]


def _build(data: dict, lines: _Lines) -> Config:
    d = data
    d["master_seed"] = _num(lines, ("master_seed",), d["master_seed"], integer=True, lo=0)
    d["frame_count"] = _num(lines, ("frame_count",), d["frame_count"], integer=True, lo=1)
    d["workers"] = _num(lines, ("workers",), d["workers"], integer=True, lo=1)
    res = d["resolution"]
    if not isinstance(res, (list, tuple)) or len(res) != 2:
        raise lines.error(("resolution",), f"expected [width, height], got {res!r}")
    d["resolution"] = [_num(lines, ("resolution", i), r, integer=True, lo=1) for i, r in enumerate(res)]
    if not isinstance(d["output_dir"], str) or not d["output_dir"]:
        raise lines.error(("output_dir",), "must be a non-empty path")
    mode = str(d["mode"]).lower()
    if mode not in MODES:
        raise lines.error(("mode",), f"must be one of {MODES}, got {d['mode']!r}")
    d["mode"] = mode
    try:
        ablation = AblationFlags.from_codes(_ablation_codes(d["ablation"]))
    except ConfigError as exc:
        raise lines.error(("ablation",), str(exc)) from None
    d["ablation"] = ablation.codes()

    if d["scenarios"] == "default":
        scenarios = tuple(DEFAULT_SCENARIOS)
    elif isinstance(d["scenarios"], list) and d["scenarios"]:
        scenarios = []
        for i, s in enumerate(d["scenarios"]):
            if not isinstance(s, Mapping):
                raise lines.error(("scenarios", i), "scenario must be a mapping")
            try:
                scenarios.append(ScenarioSpec.from_dict(s))
            except ConfigError as exc:
                raise lines.error(("scenarios", i), str(exc)) from None
        names = [s.name for s in scenarios]
        if len(set(names)) != len(names):
            raise lines.error(("scenarios",), "scenario names must be unique")
        scenarios = tuple(scenarios)
    else:
        raise lines.error(("scenarios",), "must be 'default' or a non-empty list of scenarios")

    ranges = {}
    for k, v in d["ranges"].items():
        try:
            ranges[k] = ParamRange.from_dict(v)
        except ConfigError as exc:
            raise lines.error(("ranges", k), str(exc)) from None
    d["ranges"] = {k: r.to_dict() for k, r in ranges.items()}

    road = d["road"]
    n_pts = _num(lines, ("road", "n_control_points"), road["n_control_points"], integer=True, lo=4)
    seg = _num(lines, ("road", "segment_length"), road["segment_length"], lo=0.0, lo_open=True)
    tw = {k: _num(lines, ("road", "turn_weights", k), road["turn_weights"][k], lo=0.0)
          for k in ("left", "straight", "right")}
    if sum(tw.values()) <= 0:
        raise lines.error(("road", "turn_weights"), "weights are all zero")
    imp = _num(lines, ("road", "imperfection_density"), road["imperfection_density"], lo=0.0)
    d["road"] = {"n_control_points": n_pts, "segment_length": seg, "turn_weights": tw, "imperfection_density": imp}

    p = d["placement"]
    pp = ("placement",)
    palette = {}
    if not isinstance(p["palette"], Mapping) or not p["palette"]:
        raise lines.error(pp + ("palette",), "must be a non-empty mapping of color name to [r, g, b]")
    for name, rgb in p["palette"].items():
        if not isinstance(rgb, (list, tuple)) or len(rgb) != 3:
            raise lines.error(pp + ("palette", name), f"expected [r, g, b], got {rgb!r}")
        palette[str(name)] = tuple(_num(lines, pp + ("palette", name, i), c, lo=0.0, hi=1.0)
                                   for i, c in enumerate(rgb))
    counts = {}
    for cls, n in p["variant_counts"].items():
        counts[cls] = _num(lines, pp + ("variant_counts", cls), n, integer=True, lo=1, hi=A.VARIANT_COUNTS[cls])
    probs = {k: _num(lines, pp + (k,), p[k], lo=0.0, hi=1.0)
             for k in ("truck_share", "parked_probability", "side_street_probability")}
    if probs["parked_probability"] + probs["side_street_probability"] > 1.0:
        raise lines.error(pp + ("parked_probability",), "parked + side street probability exceeds 1")
    placement = PlacementSettings(
        ego_station=_num(lines, pp + ("ego_station",), p["ego_station"], lo=0.0),
        vehicle_station=_pair(lines, pp + ("vehicle_station",), p["vehicle_station"]),
        min_vehicle_offset=_num(lines, pp + ("min_vehicle_offset",), p["min_vehicle_offset"], lo=0.0),
        vehicle_gap=_num(lines, pp + ("vehicle_gap",), p["vehicle_gap"], lo=0.0),
        lateral_jitter=_num(lines, pp + ("lateral_jitter",), p["lateral_jitter"], lo=0.0),
        yaw_jitter=_num(lines, pp + ("yaw_jitter",), p["yaw_jitter"], lo=0.0, hi=180.0),
        max_retries=_num(lines, pp + ("max_retries",), p["max_retries"], integer=True, lo=1),
        palette=palette, variant_counts=counts,
        lightness_range=_pair(lines, pp + ("lightness_range",), p["lightness_range"], lo=-1.0),
        **probs,
    )

    d["placement"] = {
        "ego_station": placement.ego_station, "vehicle_station": list(placement.vehicle_station),
        "min_vehicle_offset": placement.min_vehicle_offset, "vehicle_gap": placement.vehicle_gap,
        "lateral_jitter": placement.lateral_jitter, "yaw_jitter": placement.yaw_jitter,
        "max_retries": placement.max_retries, "palette": {k: list(v) for k, v in palette.items()},
        "variant_counts": counts, "lightness_range": list(placement.lightness_range), **probs,
    }

    dr = d["dr"]
    image_dir = dr["image_dir"]
    if image_dir is not None and not isinstance(image_dir, str):
        raise lines.error(("dr", "image_dir"), "must be a directory path or null")
    dr_settings = DRSettings(image_dir=image_dir,
                             depth=_pair(lines, ("dr", "depth"), dr["depth"], lo=0.0),
                             vehicles=_pair(lines, ("dr", "vehicles"), dr["vehicles"], integer=True, lo=0),
                             distractors=_pair(lines, ("dr", "distractors"), dr["distractors"], integer=True, lo=0))
    if dr_settings.depth[0] <= 0.1:
        raise lines.error(("dr", "depth"), "near depth must exceed the camera near plane (0.1 m)")
    d["dr"] = {"image_dir": image_dir, "depth": list(dr_settings.depth), "vehicles": list(dr_settings.vehicles),
               "distractors": list(dr_settings.distractors)}

    contrast = _num(lines, ("post", "contrast"), d["post"]["contrast"], lo=0.0, lo_open=True)
    try:
        saturation = ParamRange.from_dict(d["post"]["saturation"])
    except ConfigError as exc:
        raise lines.error(("post", "saturation"), str(exc)) from None
    if saturation.kind not in ("uniform", "fixed"):
        raise lines.error(("post", "saturation"), "must be a uniform or fixed range")
    d["post"] = {"contrast": contrast, "saturation": saturation.to_dict()}

    lab = d["labels"]
    cuts = _pair(lines, ("labels", "occlusion_cuts"), lab["occlusion_cuts"], lo=0.0)
    rules = []
    for b in ("easy", "moderate", "hard"):
        r = lab["difficulty"][b]
        path = ("labels", "difficulty", b)
        rules.append((_num(lines, path + ("min_height",), r["min_height"], lo=0.0),
                      _num(lines, path + ("max_occlusion_state",), r["max_occlusion_state"], integer=True, lo=0,
                           hi=2),
                      _num(lines, path + ("max_truncation",), r["max_truncation"], lo=0.0, hi=1.0)))
    d["labels"] = {"occlusion_cuts": list(cuts), "difficulty": {
        b: {"min_height": r[0], "max_occlusion_state": r[1], "max_truncation": r[2]}
        for b, r in zip(("easy", "moderate", "hard"), rules)}}
    try:
        thresholds = DifficultyThresholds(*rules)
    except ValueError as exc:
        raise lines.error(("labels", "difficulty"), str(exc)) from None

    try:
        scene = SceneSettings(scenarios=scenarios, ranges=ranges, ablation=ablation, placement=placement,
                              dr=dr_settings, n_control_points=n_pts, segment_length=seg, turn_weights=tw,
                              imperfection_density=imp)
    except ConfigError as exc:
        raise lines.error((), str(exc)) from None
    return Config(data=d, hash=canonical_hash(d), source=lines.source, ablation=ablation, scene=scene,
                  saturation=saturation, thresholds=thresholds, occlusion_cuts=cuts)


def apply_overrides(user: dict, overrides: Mapping[str, Any] | None) -> dict:
    out = dict(user)
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k not in DEFAULTS:
            raise ConfigError(f"unknown override {k!r}")
        out[k] = v
    return out


def config_from_dict(user: Mapping[str, Any] | None, overrides: Mapping[str, Any] | None = None,
                     source: str | None = None, lines: _Lines | None = None) -> Config:
    lines = lines or _Lines(source)
    user = {} if user is None else user
    if not isinstance(user, Mapping):
        raise ConfigError(f"{source or 'config'}: top level must be a mapping")
    if not lines.lines:
        _check_keys(user, DEFAULTS, (), lines)
    user = apply_overrides(dict(user), overrides)
    return _build(_merge(DEFAULTS, user, DEFAULTS), lines)


def load_config(path: str | os.PathLike, overrides: Mapping[str, Any] | None = None) -> Config:
    """Parse, validate and fill defaults; raises ConfigError naming the key and line."""
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from exc
    lines = _Lines(path)
    try:
        node = yaml.compose(text)
        user = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: YAML parse error: {exc}") from exc
    if node is not None:
        if not isinstance(node, yaml.MappingNode):
            raise ConfigError(f"{path}: top level must be a mapping")
        _walk(node, DEFAULTS, (), lines)
    return config_from_dict(user, overrides, source=path, lines=lines)


def dump_effective(cfg: Config) -> str:
    return json.dumps(cfg.data, indent=2, sort_keys=True)
