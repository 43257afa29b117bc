from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdrgen.errors import ConfigError
from sdrgen.rng import make_stream
from sdrgen.sampling import (DAYLIGHT, DEFAULT_SCENARIOS, SETTINGS, AblationFlags, ParamRange, ScenarioSpec,
                             filter_scenarios, sample_globals, sample_range, sample_scenario)


def test_twenty_default_scenarios():
    assert len(DEFAULT_SCENARIOS) == 20
    assert len({s.name for s in DEFAULT_SCENARIOS}) == 20
    assert {s.setting for s in DEFAULT_SCENARIOS} == set(SETTINGS)


def test_scenario_draws_roughly_uniform():
    r = make_stream(0, 0, "scenario")
    counts = Counter(sample_scenario(r, DEFAULT_SCENARIOS).name for _ in range(20000))
    assert len(counts) == 20
    assert all(800 < c < 1200 for c in counts.values())


def test_empty_table_is_config_error():
    with pytest.raises(ConfigError):
        sample_scenario(make_stream(0, 0, "s"), [])


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32), lo=st.floats(-100, 100), w=st.floats(0, 100))
def test_uniform_range_contains_draw(seed, lo, w):
    pr = ParamRange.uniform(lo, lo + w)
    assert pr.contains(sample_range(make_stream(seed, 0, "r"), pr))


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32), lo=st.integers(-50, 50), w=st.integers(0, 20))
def test_integer_range_contains_draw(seed, lo, w):
    pr = ParamRange.integer(lo, lo + w)
    v = sample_range(make_stream(seed, 0, "r"), pr)
    assert isinstance(v, int) and pr.contains(v)


def test_categorical_and_fixed():
    r = make_stream(0, 0, "c")
    pr = ParamRange.categorical({"a": 1.0, "b": 0.0})
    assert {sample_range(r, pr) for _ in range(50)} == {"a"}
    assert sample_range(r, ParamRange.fixed(7)) == 7


@pytest.mark.parametrize("d", [
    {"kind": "uniform", "low": 2, "high": 1},
    {"kind": "gaussian", "mean": 0},
    {"kind": "uniform", "low": 0, "high": 1, "extra": 3},
])
def test_bad_ranges(d):
    with pytest.raises(ConfigError):
        ParamRange.from_dict(d)


def test_range_dict_round_trip():
    for pr in (ParamRange.uniform(0, 1), ParamRange.integer(2, 5), ParamRange.fixed("x"),
               ParamRange.categorical({"a": 1, "b": 2})):
        assert ParamRange.from_dict(pr.to_dict()) == pr


def test_ablation_codes():
    f = AblationFlags.from_codes(["C", "sr=urban", "HC", "RS", "RL", "MP"])
    assert f.no_context and f.sr_setting == "urban" and f.no_high_contrast
    assert f.no_random_saturation and f.no_random_light and f.no_multiple_pose
    assert AblationFlags.from_codes(f.codes()) == f
    assert AblationFlags.from_codes(["SR"]).sr_setting == "rural"


@pytest.mark.parametrize("codes", [["XX"], ["SR=desert"]])
def test_bad_ablation(codes):
    with pytest.raises(ConfigError):
        AblationFlags.from_codes(codes)


def test_filter_scenarios_by_setting():
    kept = filter_scenarios(DEFAULT_SCENARIOS, AblationFlags(sr_setting="rural"))
    assert kept and all(s.setting == "rural" for s in kept)


def test_globals_respect_ranges():
    for frame in range(200):
        sc = DEFAULT_SCENARIOS[frame % 20]
        g = sample_globals(make_stream(9, frame, "globals"), sc)
        assert -5 <= g.sun_elevation <= 90
        assert 60 <= g.camera_fov_horizontal <= 100
        assert g.max_vehicles_per_lane <= g.max_vehicles_total
        assert g.lane_count == sc.lane_count.value
        assert g.setting == sc.setting


def test_random_light_pins_only_lighting():
    sc = DEFAULT_SCENARIOS[3]
    full = sample_globals(make_stream(2, 4, "globals"), sc)
    pinned = sample_globals(make_stream(2, 4, "globals"), sc, AblationFlags(no_random_light=True))
    assert pinned.sun_elevation == DAYLIGHT["sun_elevation"]
    assert pinned.camera_fov_horizontal == full.camera_fov_horizontal
    assert pinned.cloud_seed == full.cloud_seed


def test_scenario_overrides_apply():
    sc = next(s for s in DEFAULT_SCENARIOS if "wide verge" in s.name)
    for frame in range(50):
        assert sample_globals(make_stream(0, frame, "globals"), sc).side_stretch_width >= 20.0


def test_scenario_spec_round_trip():
    for sc in DEFAULT_SCENARIOS:
        assert ScenarioSpec.from_dict(sc.to_dict()) == sc
