import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdrgen.render.camera import Camera, project, rotation
from sdrgen.scene import EgoPose

from conftest import axis_camera, cam_to_world


def test_principal_point():
    cam = axis_camera()
    assert project(cam, (0.0, 0.0, 10.0)) == (320.0, 240.0, 10.0)


def test_offset_point():
    cam = axis_camera()
    x, y, z = project(cam, (1.0, 0.0, 10.0))
    assert (x, y, z) == pytest.approx((370.0, 240.0, 10.0))


def test_up_is_up_in_image():
    cam = axis_camera()
    _, y, _ = project(cam, (0.0, 1.0, 10.0))
    assert y == pytest.approx(190.0)


def test_behind_camera():
    cam = axis_camera()
    assert project(cam, (0.0, 0.0, -1.0)) is None
    assert project(cam, (0.0, 0.0, 0.05)) is None


def test_world_axes():
    cam = axis_camera()
    q = cam.world_to_camera(cam_to_world((1.0, 2.0, 3.0)))
    np.testing.assert_allclose(q, [1.0, 2.0, 3.0], atol=1e-12)


def test_rotation_orthonormal():
    R = rotation(37.0, -4.0)
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
    # x right, y up, z forward is a left-handed frame
    assert np.linalg.det(R) == pytest.approx(-1.0)


def test_intrinsics_from_fov():
    cam = Camera(position=np.zeros(3), yaw=0, pitch=0, fov_horizontal=90.0, width=1248, height=384)
    assert cam.fx == pytest.approx(624.0)
    assert (cam.cx, cam.cy) == (624.0, 192.0)


def test_from_pose():
    ego = EgoPose(position=(1.0, 2.0, 1.6), yaw=10.0, pitch=-2.0, fov_horizontal=80.0)
    cam = Camera.from_pose(ego, (320, 96))
    assert cam.shape == (96, 320)
    np.testing.assert_array_equal(cam.position, [1.0, 2.0, 1.6])


@pytest.mark.parametrize("fov", [5.0, 175.0])
def test_bad_fov(fov):
    with pytest.raises(ValueError):
        Camera(position=np.zeros(3), yaw=0, pitch=0, fov_horizontal=fov, width=10, height=10)


def test_pixel_rays_hit_pixel_centers():
    cam = axis_camera(width=64, height=48, fx=40.0)
    rays = cam.pixel_rays()
    pts = cam.project_points(rays[5, 7] * 3.0)
    np.testing.assert_allclose(pts[:2], [7.5, 5.5], atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(yaw=st.floats(-180, 180), pitch=st.floats(-10, 10),
       x=st.floats(0, 1248), y=st.floats(0, 384), depth=st.floats(0.2, 500))
def test_round_trip(yaw, pitch, x, y, depth):
    cam = Camera(position=np.array([3.0, -2.0, 1.7]), yaw=yaw, pitch=pitch, fov_horizontal=75.0,
                 width=1248, height=384)
    p = cam.unproject_pixel(x, y, depth)
    px, py, pz = project(cam, cam.world_to_camera(p))
    back = cam.unproject_pixel(px, py, pz)
    np.testing.assert_allclose(back, p, atol=1e-6)
    assert (px, py, pz) == pytest.approx((x, y, depth), abs=1e-6)
