from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdrgen import assets as A
from sdrgen.errors import ConfigError
from sdrgen.rng import make_stream


@pytest.mark.parametrize("cls", A.ASSET_CLASSES)
def test_every_class_builds_within_budget(cls):
    for v in range(min(3, A.VARIANT_COUNTS[cls])):
        mesh = A.instantiate_asset(A.asset_descriptor(cls, v))
        assert 0 < mesh.faces.shape[0] < 2000
        assert mesh.normals.shape == mesh.vertices.shape
        np.testing.assert_allclose(np.linalg.norm(mesh.normals, axis=1), 1.0, atol=1e-9)


@pytest.mark.parametrize("cls", ["car", "truck", "building", "house", "pedestrian"])
def test_bounds_match_nominal_dims(cls):
    for v in range(A.VARIANT_COUNTS[cls]):
        desc = A.asset_descriptor(cls, v)
        lo, hi = A.instantiate_asset(desc).bounds
        np.testing.assert_allclose(hi - lo, desc.nominal_dims, rtol=0.01)
        assert lo[2] == pytest.approx(0.0, abs=1e-9)


def test_same_variant_same_buffers():
    a = A._mesh_cached.__wrapped__(A.asset_descriptor("car", 3))
    b = A._mesh_cached.__wrapped__(A.asset_descriptor("car", 3))
    np.testing.assert_array_equal(a.vertices, b.vertices)
    np.testing.assert_array_equal(a.faces, b.faces)


def test_car_variants_distinct():
    descs = [A.asset_descriptor("car", v) for v in range(74)]
    keys = {(d.nominal_dims, d.mesh_params) for d in descs}
    assert len(keys) == 74


def test_unknown_class():
    with pytest.raises(ConfigError):
        A.asset_descriptor("spaceship", 0)
    with pytest.raises(ConfigError):
        A.asset_descriptor("car", 74)


def test_paint_palette_has_nine_colors():
    assert len(A.PAINT_PALETTE) == 9


def test_vehicle_paint_from_palette():
    r = make_stream(0, 0, "m")
    names = Counter()
    for _ in range(900):
        m = A.sample_material(r, "car")
        assert m.base_color == A.PAINT_PALETTE[m.palette_name]
        assert -0.2 <= m.lightness_delta <= 0.2
        names[m.palette_name] += 1
    assert len(names) == 9


def test_zero_lightness_returns_base_color():
    m = A.sample_material(make_stream(0, 0, "m"), "car", lightness_range=(0.0, 0.0))
    assert m.albedo == m.base_color


def test_pedestrian_not_restricted_to_palette():
    r = make_stream(1, 0, "m")
    colors = {A.sample_material(r, "pedestrian").base_color for _ in range(50)}
    assert not colors <= set(A.PAINT_PALETTE.values())


def test_apply_lightness_mixes_toward_white_or_black():
    assert A.apply_lightness((0.95, 0.5, 0.02), 0.2) == pytest.approx((0.96, 0.6, 0.216))
    assert A.apply_lightness((0.1, 0.5, 0.9), -0.2) == pytest.approx((0.08, 0.4, 0.72))


@settings(max_examples=200, deadline=None)
@given(c=st.tuples(*[st.floats(0, 1)] * 3), d=st.floats(-1, 1))
def test_apply_lightness_stays_in_unit_range(c, d):
    out = A.apply_lightness(c, d)
    assert all(0.0 <= v <= 1.0 for v in out)
