import numpy as np
import pytest

from sdrgen.config import config_from_dict
from sdrgen.render.camera import Camera
from sdrgen.render.shading import Lighting, PostParams

SMALL = {"resolution": [320, 96], "frame_count": 4}


def make_config(**kw):
    data = dict(SMALL)
    data.update(kw)
    return config_from_dict(data)


@pytest.fixture
def small_config():
    return make_config()


def axis_camera(width=640, height=480, fx=500.0):
    """Camera at the origin looking down world +x: camera X is world -y, camera Y is world +z."""
    return Camera(position=np.zeros(3), yaw=0.0, pitch=0.0, fov_horizontal=60.0, width=width, height=height,
                  fx=fx, cx=width / 2, cy=height / 2)


def cam_to_world(p):
    """Camera-frame point to world for ``axis_camera``."""
    x, y, z = p
    return np.array([z, -x, y], dtype=float)


FLAT_LIGHT = Lighting(sun_direction=(0.0, 0.0, -1.0), sun_rgb=(1.0, 1.0, 1.0), ambient_rgb=(0.3, 0.3, 0.3))
NEUTRAL_POST = PostParams(contrast=100.0, saturation=1.0)


# one line per acceptance criterion, repeated at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
