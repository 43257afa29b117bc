"""Scenario table, parameter ranges and the scenario/global-parameter draws.

A frame is generated top-down: a scenario is drawn uniformly from the table,
then the scene-wide globals are drawn from ranges resolved for that scenario.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Mapping, Sequence

from .errors import ConfigError
from .rng import RngStream

KINDS = ("uniform", "integer", "categorical", "fixed")
SETTINGS = ("rural", "suburban", "urban")
SIDE_STYLES = ("fields", "houses", "buildings")


@dataclass(frozen=True)
class ParamRange:
    """One distribution family: uniform float, uniform int, weighted categories or a constant."""

    kind: str
    low: float | None = None
    high: float | None = None
    categories: tuple[tuple[Any, float], ...] = ()
    value: Any = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown range kind {self.kind!r}")
        if self.kind in ("uniform", "integer"):
            if self.low is None or self.high is None:
                raise ConfigError(f"{self.kind} range needs low and high")
            if not (math.isfinite(self.low) and math.isfinite(self.high)):
                raise ConfigError("range bounds must be finite")
            if self.low > self.high:
                raise ConfigError(f"range low {self.low} > high {self.high}")
            if self.kind == "integer" and (int(self.low) != self.low or int(self.high) != self.high):
                raise ConfigError("integer range bounds must be integers")
        elif self.kind == "categorical":
            if not self.categories:
                raise ConfigError("categorical range needs at least one category")
            weights = [w for _, w in self.categories]
            if any(w < 0 or not math.isfinite(w) for w in weights):
                raise ConfigError("categorical weights must be finite and non-negative")
            if sum(weights) <= 0:
                raise ConfigError("categorical weights are all zero")
        elif self.value is None:
            raise ConfigError("fixed range needs a value")

    @classmethod
    def uniform(cls, low: float, high: float) -> "ParamRange":
        return cls("uniform", float(low), float(high))

    @classmethod
    def integer(cls, low: int, high: int) -> "ParamRange":
        return cls("integer", int(low), int(high))

    @classmethod
    def fixed(cls, value: Any) -> "ParamRange":
        return cls("fixed", value=value)

    @classmethod
    def categorical(cls, weights: Mapping[Any, float] | Sequence[tuple[Any, float]]) -> "ParamRange":
        items = weights.items() if isinstance(weights, Mapping) else weights
        return cls("categorical", categories=tuple((k, float(w)) for k, w in items))

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ParamRange":
        if not isinstance(d, Mapping) or "kind" not in d:
            raise ConfigError(f"range must be a mapping with a 'kind': {d!r}")
        kind = d["kind"]
        allowed = {"uniform": {"kind", "low", "high"}, "integer": {"kind", "low", "high"},
                   "categorical": {"kind", "categories"}, "fixed": {"kind", "value"}}
        if kind not in allowed:
            raise ConfigError(f"unknown range kind {kind!r}")
        extra = set(d) - allowed[kind]
        if extra:
            raise ConfigError(f"unknown key(s) {sorted(extra)} in {kind} range")
        try:
            if kind == "uniform":
                return cls.uniform(d["low"], d["high"])
            if kind == "integer":
                return cls.integer(d["low"], d["high"])
            if kind == "fixed":
                return cls.fixed(d["value"])
            cats = d["categories"]
            return cls.categorical([(c["name"], c["weight"]) for c in cats])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed {kind} range {dict(d)!r}: {exc}") from exc

    def to_dict(self) -> dict:
        if self.kind in ("uniform", "integer"):
            return {"kind": self.kind, "low": self.low, "high": self.high}
        if self.kind == "fixed":
            return {"kind": "fixed", "value": self.value}
        return {"kind": "categorical",
                "categories": [{"name": n, "weight": w} for n, w in self.categories]}

    def contains(self, x: Any) -> bool:
        if self.kind == "uniform":
            return self.low <= x <= self.high
        if self.kind == "integer":
            return self.low <= x <= self.high and int(x) == x
        if self.kind == "fixed":
            return x == self.value
        return any(x == n and w > 0 for n, w in self.categories)

    @property
    def upper(self) -> float:
        if self.kind in ("uniform", "integer"):
            return self.high
        if self.kind == "fixed":
            return self.value
        return max(n for n, w in self.categories if w > 0)


def sample_range(rng: RngStream, rng_range: ParamRange):
    """Draw one value from ``rng_range``."""
    if rng_range.kind == "uniform":
        return rng.uniform(rng_range.low, rng_range.high)
    if rng_range.kind == "integer":
        return rng.integers(int(rng_range.low), int(rng_range.high))
    if rng_range.kind == "fixed":
        return rng_range.value
    names = [n for n, _ in rng_range.categories]
    return names[rng.choice_index([w for _, w in rng_range.categories])]


@dataclass(frozen=True)
class AblationFlags:
    """Each flag removes one randomization feature from the full pipeline."""

    no_context: bool = False            # C
    sr_setting: str | None = None       # SR: restrict scenarios to one setting
    no_high_contrast: bool = False      # HC
    no_random_saturation: bool = False  # RS
    no_random_light: bool = False       # RL
    no_multiple_pose: bool = False      # MP

    @classmethod
    def from_codes(cls, codes: Sequence[str]) -> "AblationFlags":
        kw: dict[str, Any] = {}
        for raw in codes:
            code = raw.strip()
            if not code:
                continue
            name, _, arg = code.partition("=")
            name = name.upper()
            if name == "C":
                kw["no_context"] = True
            elif name == "SR":
                setting = (arg or "rural").lower()
                if setting not in SETTINGS:
                    raise ConfigError(f"SR setting must be one of {SETTINGS}, got {arg!r}")
                kw["sr_setting"] = setting
            elif name == "HC":
                kw["no_high_contrast"] = True
            elif name == "RS":
                kw["no_random_saturation"] = True
            elif name == "RL":
                kw["no_random_light"] = True
            elif name == "MP":
                kw["no_multiple_pose"] = True
            else:
                raise ConfigError(f"unknown ablation flag {code!r}")
        return cls(**kw)

    def codes(self) -> list[str]:
        out = []
        if self.no_context:
            out.append("C")
        if self.sr_setting:
            out.append(f"SR={self.sr_setting}")
        if self.no_high_contrast:
            out.append("HC")
        if self.no_random_saturation:
            out.append("RS")
        if self.no_random_light:
            out.append("RL")
        if self.no_multiple_pose:
            out.append("MP")
        return out


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    setting: str
    lane_count: ParamRange
    has_median: bool = False
    has_sidewalk: bool = False
    side_stretch_style: ParamRange = field(default_factory=lambda: ParamRange.fixed("fields"))
    overrides: tuple[tuple[str, ParamRange], ...] = ()

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ConfigError(f"scenario {self.name!r}: unknown setting {self.setting!r}")
        lo = self.lane_count.low if self.lane_count.kind in ("uniform", "integer") else None
        if self.lane_count.kind == "fixed":
            lo = self.lane_count.value
        if self.lane_count.kind == "categorical":
            lo = min(n for n, _ in self.lane_count.categories)
        if lo is None or lo < 1 or self.lane_count.kind == "uniform":
            raise ConfigError(f"scenario {self.name!r}: lane_count must be an integer range >= 1")
        cap = 2 if self.setting == "rural" else (4 if self.setting == "suburban" else 6)
        if self.lane_count.upper > cap:
            raise ConfigError(f"scenario {self.name!r}: {self.setting} roads allow at most {cap} lanes")
        for style in self._styles():
            if style not in SIDE_STYLES:
                raise ConfigError(f"scenario {self.name!r}: unknown side stretch style {style!r}")
        for key, _ in self.overrides:
            if key not in GLOBAL_RANGE_KEYS:
                raise ConfigError(f"scenario {self.name!r}: unknown override {key!r}")

    def _styles(self):
        r = self.side_stretch_style
        if r.kind == "fixed":
            return [r.value]
        if r.kind == "categorical":
            return [n for n, _ in r.categories]
        raise ConfigError(f"scenario {self.name!r}: side_stretch_style must be fixed or categorical")

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ScenarioSpec":
        allowed = {"name", "setting", "lane_count", "has_median", "has_sidewalk",
                   "side_stretch_style", "overrides"}
        extra = set(d) - allowed
        if extra:
            raise ConfigError(f"unknown key(s) {sorted(extra)} in scenario")
        try:
            lanes = d["lane_count"]
            lane_range = ParamRange.fixed(int(lanes)) if isinstance(lanes, int) else ParamRange.from_dict(lanes)
            style = d.get("side_stretch_style", "fields")
            style_range = ParamRange.fixed(style) if isinstance(style, str) else ParamRange.from_dict(style)
            overrides = tuple(sorted((k, ParamRange.from_dict(v)) for k, v in d.get("overrides", {}).items()))
            return cls(name=str(d["name"]), setting=str(d["setting"]), lane_count=lane_range,
                       has_median=bool(d.get("has_median", False)),
                       has_sidewalk=bool(d.get("has_sidewalk", False)),
                       side_stretch_style=style_range, overrides=overrides)
        except KeyError as exc:
            raise ConfigError(f"scenario missing key {exc}") from exc

    def to_dict(self) -> dict:
        return {"name": self.name, "setting": self.setting, "lane_count": self.lane_count.to_dict(),
                "has_median": self.has_median, "has_sidewalk": self.has_sidewalk,
                "side_stretch_style": self.side_stretch_style.to_dict(),
                "overrides": {k: v.to_dict() for k, v in self.overrides}}


@dataclass(frozen=True)
class GlobalParams:
    scenario: str
    setting: str
    sun_azimuth: float
    sun_elevation: float
    sun_color_temperature: float
    sun_intensity: float
    sky_color: tuple[float, float, float]
    cloud_density: float
    cloud_seed: int
    camera_yaw: float
    camera_pitch: float
    camera_fov_horizontal: float
    camera_height: float
    lane_count: int
    has_median: bool
    has_sidewalk: bool
    side_stretch_style: str
    max_vehicles_per_lane: int
    max_vehicles_total: int
    turn_decision_period: int
    lane_width: float
    median_width: float
    sidewalk_width: float
    gutter_width: float
    side_stretch_width: float

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# Order matters: draws are taken in this order from the "globals" stream.
DEFAULT_GLOBAL_RANGES: dict[str, ParamRange] = {
    "sun_azimuth": ParamRange.uniform(0.0, 360.0),
    "sun_elevation": ParamRange.uniform(-5.0, 90.0),
    "sun_color_temperature": ParamRange.uniform(2500.0, 8000.0),
    "sun_intensity": ParamRange.uniform(0.5, 1.5),
    "sky_red": ParamRange.uniform(0.35, 0.75),
    "sky_green": ParamRange.uniform(0.50, 0.85),
    "sky_blue": ParamRange.uniform(0.70, 1.00),
    "cloud_density": ParamRange.uniform(0.0, 1.0),
    "cloud_seed": ParamRange.integer(0, 2**31 - 1),
    "camera_yaw": ParamRange.uniform(-5.0, 5.0),
    "camera_pitch": ParamRange.uniform(-5.0, 5.0),
    "camera_fov_horizontal": ParamRange.uniform(60.0, 100.0),
    "camera_height": ParamRange.uniform(1.4, 1.9),
    "max_vehicles_per_lane": ParamRange.integer(1, 6),
    "max_vehicles_total": ParamRange.integer(6, 30),
    "turn_decision_period": ParamRange.fixed(10),
    "lane_width": ParamRange.fixed(3.5),
    "median_width": ParamRange.uniform(2.0, 6.0),
    "sidewalk_width": ParamRange.uniform(1.5, 2.5),
    "gutter_width": ParamRange.uniform(0.3, 0.6),
    "side_stretch_width": ParamRange.uniform(10.0, 30.0),
}
GLOBAL_RANGE_KEYS = tuple(DEFAULT_GLOBAL_RANGES)

# "broad daylight" used when random lighting is ablated
DAYLIGHT = {
    "sun_azimuth": 135.0,
    "sun_elevation": 55.0,
    "sun_color_temperature": 6000.0,
    "sun_intensity": 1.2,
    "sky_red": 0.55,
    "sky_green": 0.72,
    "sky_blue": 0.95,
}


def _scenario(name, setting, lanes, median=False, sidewalk=False, style="fields", **overrides):
    return ScenarioSpec(
        name=name, setting=setting, lane_count=ParamRange.fixed(lanes), has_median=median,
        has_sidewalk=sidewalk,
        side_stretch_style=ParamRange.fixed(style) if isinstance(style, str) else ParamRange.categorical(style),
        overrides=tuple(sorted(overrides.items())),
    )


DEFAULT_SCENARIOS: tuple[ScenarioSpec, ...] = (
    _scenario("rural 1-lane road", "rural", 1),
    _scenario("rural 2-lane road", "rural", 2),
    _scenario("rural 2-lane road with houses", "rural", 2, style="houses"),
    _scenario("rural 2-lane road with a sidewalk", "rural", 2, sidewalk=True, style={"fields": 1, "houses": 1}),
    _scenario("rural 2-lane road with a grassy median", "rural", 2, median=True),
    _scenario("rural 2-lane road with a wide verge", "rural", 2,
              side_stretch_width=ParamRange.uniform(20.0, 30.0)),
    _scenario("suburban 2-lane road", "suburban", 2, style="houses"),
    _scenario("suburban 2-lane road with a sidewalk", "suburban", 2, sidewalk=True, style="houses"),
    _scenario("suburban 3-lane road with a sidewalk", "suburban", 3, sidewalk=True, style="houses"),
    _scenario("suburban 4-lane road", "suburban", 4, style={"houses": 2, "fields": 1}),
    _scenario("suburban 4-lane road with a sidewalk", "suburban", 4, sidewalk=True, style="houses"),
    _scenario("suburban 4-lane road with a grassy median", "suburban", 4, median=True, style="houses"),
    _scenario("suburban 4-lane road with a grassy median and a sidewalk", "suburban", 4, median=True,
              sidewalk=True, style={"houses": 2, "buildings": 1}),
    _scenario("urban 2-lane road with a sidewalk", "urban", 2, sidewalk=True, style="buildings"),
    _scenario("urban 4-lane road", "urban", 4, style="buildings"),
    _scenario("urban 4-lane road with a sidewalk", "urban", 4, sidewalk=True, style="buildings"),
    _scenario("urban 4-lane road with a grassy median and a sidewalk", "urban", 4, median=True,
              sidewalk=True, style="buildings"),
    _scenario("urban 6-lane road with a sidewalk", "urban", 6, sidewalk=True, style="buildings"),
    _scenario("urban 6-lane road with a grassy median", "urban", 6, median=True, style="buildings"),
    _scenario("urban 6-lane road with a grassy median and a sidewalk", "urban", 6, median=True,
              sidewalk=True, style="buildings"),
)


def sample_scenario(rng: RngStream, table: Sequence[ScenarioSpec]) -> ScenarioSpec:
    """Uniform draw over ``table``."""
    if not table:
        raise ConfigError("scenario table is empty")
    return table[rng.integers(0, len(table) - 1)]


def filter_scenarios(table: Sequence[ScenarioSpec], ablation: AblationFlags) -> list[ScenarioSpec]:
    if ablation.sr_setting is None:
        return list(table)
    kept = [s for s in table if s.setting == ablation.sr_setting]
    if not kept:
        raise ConfigError(f"no scenarios with setting {ablation.sr_setting!r}")
    return kept


def resolve_ranges(scenario: ScenarioSpec, base: Mapping[str, ParamRange] | None = None) -> dict[str, ParamRange]:
    ranges = dict(DEFAULT_GLOBAL_RANGES if base is None else base)
    ranges.update(dict(scenario.overrides))
    return ranges


def sample_globals(rng: RngStream, scenario: ScenarioSpec, ablation: AblationFlags = AblationFlags(),
                   ranges: Mapping[str, ParamRange] | None = None) -> GlobalParams:
    """Draw every scene-wide parameter for ``scenario``.

    All ranges are always sampled, in a fixed order, so that pinning the
    lighting for the random-light ablation leaves every other value unchanged.
    """
    resolved = resolve_ranges(scenario, ranges)
    missing = [k for k in GLOBAL_RANGE_KEYS if k not in resolved]
    if missing:
        raise ConfigError(f"missing ranges: {missing}")
    v = {k: sample_range(rng, resolved[k]) for k in GLOBAL_RANGE_KEYS}
    lane_count = int(sample_range(rng, scenario.lane_count))
    style = sample_range(rng, scenario.side_stretch_style)

    if ablation.no_random_light:
        v.update(DAYLIGHT)

    per_lane = int(v["max_vehicles_per_lane"])
    total = int(v["max_vehicles_total"])
    if total < per_lane:
        per_lane = total
    period = int(v["turn_decision_period"])
    if period < 1:
        raise ConfigError("turn_decision_period must be >= 1")
    return GlobalParams(
        scenario=scenario.name,
        setting=scenario.setting,
        sun_azimuth=float(v["sun_azimuth"]),
        sun_elevation=float(v["sun_elevation"]),
        sun_color_temperature=float(v["sun_color_temperature"]),
        sun_intensity=float(v["sun_intensity"]),
        sky_color=(float(v["sky_red"]), float(v["sky_green"]), float(v["sky_blue"])),
        cloud_density=float(v["cloud_density"]),
        cloud_seed=int(v["cloud_seed"]),
        camera_yaw=float(v["camera_yaw"]),
        camera_pitch=float(v["camera_pitch"]),
        camera_fov_horizontal=float(v["camera_fov_horizontal"]),
        camera_height=float(v["camera_height"]),
        lane_count=lane_count,
        has_median=scenario.has_median,
        has_sidewalk=scenario.has_sidewalk,
        side_stretch_style=str(style),
        max_vehicles_per_lane=per_lane,
        max_vehicles_total=total,
        turn_decision_period=period,
        lane_width=float(v["lane_width"]),
        median_width=float(v["median_width"]),
        sidewalk_width=float(v["sidewalk_width"]),
        gutter_width=float(v["gutter_width"]),
        side_stretch_width=float(v["side_stretch_width"]),
    )


def with_overrides(g: GlobalParams, **kw) -> GlobalParams:
    return replace(g, **kw)
