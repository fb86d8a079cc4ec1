import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci",
    deadline=None,
    max_examples=50,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")

from traybot.config import (  # noqa: E402
    load_mission_config,
    load_sim_config,
    load_world_config,
)
from traybot.geometry import ManwayRect, TrayWorld  # noqa: E402

CONFIG_DIR = "configs"


@pytest.fixture(scope="session")
def vendor_world() -> TrayWorld:
    """The experiment tray: 35 in radius, 27.5 x 15 in manway, three layers."""
    return load_world_config(f"{CONFIG_DIR}/world.json").build()


@pytest.fixture(scope="session")
def world_cfg():
    return load_world_config(f"{CONFIG_DIR}/world.json")


@pytest.fixture(scope="session")
def mission_cfg():
    return load_mission_config(f"{CONFIG_DIR}/mission.json")


@pytest.fixture(scope="session")
def sim_cfg():
    return load_sim_config(f"{CONFIG_DIR}/sim.json")


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


def make_world(
    center=(0.0, 0.0),
    theta=0.0,
    long_side=0.6985,
    short_side=0.3810,
    plate_radius=0.8890,
    base_offset=0.25,
    pad_long=0.15,
    pad_short=0.15,
    buffer_margin=0.05,
    layers=1,
    layer_gap=0.5588,
) -> TrayWorld:
    rect = ManwayRect.from_center(center, theta, long_side, short_side)
    return TrayWorld.from_manway(
        rect,
        plate_radius=plate_radius,
        base_offset=base_offset,
        layer_count=layers,
        layer_gap=layer_gap,
        tray_center=(0.0, 0.0),
        pad_long=pad_long,
        pad_short=pad_short,
        buffer_margin=buffer_margin,
    )
